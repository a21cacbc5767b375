"""Physical parameters, mode profile, coupling strengths and the system Hamiltonian."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.constants as const
import scipy.sparse as sp

from plasmon_cqed import constants as C
from plasmon_cqed import hilbert as hs
from plasmon_cqed.hilbert import HilbertSpec

DEBYE_CM = 1e-21 / const.c
_J_PER_MEV = 1e-3 * const.e

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NanocavityParams:
    omega_cav: float = C.DEFAULT_OMEGA_CAV
    kappa_out: float = C.DEFAULT_KAPPA_OUT
    mode_volume_re: float = C.DEFAULT_MODE_VOLUME_RE
    mode_volume_im: float = C.DEFAULT_MODE_VOLUME_IM
    epsilon: float = C.DEFAULT_EPSILON
    sigma_ext_classical: float = C.DEFAULT_SIGMA_EXT

    def __post_init__(self):
        if not self.kappa_out > 0:
            raise ValueError(f"kappa_out must be > 0, got {self.kappa_out}")
        if not self.mode_volume_re > 0:
            raise ValueError(f"mode_volume_re must be > 0, got {self.mode_volume_re}")
        if not self.epsilon >= 1:
            raise ValueError(f"epsilon must be >= 1, got {self.epsilon}")
        if not self.sigma_ext_classical > 0:
            raise ValueError(f"sigma_ext_classical must be > 0, got {self.sigma_ext_classical}")

    @property
    def volume_ratio(self) -> float:
        """Im[V] / Re[V]."""
        return self.mode_volume_im / self.mode_volume_re


@dataclass(frozen=True)
class EmitterSpec:
    omega_qe: float = C.DEFAULT_OMEGA_CAV
    kappa_vib: float = C.DEFAULT_KAPPA_VIB
    dipole: float = C.DEFAULT_DIPOLE_DEBYE
    position: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kappa_vib < 0:
            raise ValueError(f"kappa_vib must be >= 0, got {self.kappa_vib}")
        if not self.dipole > 0:
            raise ValueError(f"dipole must be > 0, got {self.dipole}")
        object.__setattr__(self, "position", tuple(float(p) for p in self.position))

    @property
    def radius(self) -> float:
        return math.hypot(*self.position)


@dataclass(frozen=True)
class DriveSpec:
    omega_p: float
    alpha: float = 0.0
    kappa_in: float = 0.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


def coupling_prefactor(cav: NanocavityParams) -> float:
    """sqrt(hbar w / (2 eps0 eps Re[V])) in V/m."""
    energy = cav.omega_cav * _J_PER_MEV
    volume = cav.mode_volume_re * 1e-27
    return math.sqrt(energy / (2 * const.epsilon_0 * cav.epsilon * volume))


def plasmon_lifetime(cav: NanocavityParams) -> float:
    """Decay time (fs) of the mode field, 1 / Im of the complex eigenfrequency."""
    return C.HBAR_MEV_FS / cav.kappa_out


def weak_coupling_width(g0: float, kappa_vib: float, boundary: float = 6.0) -> float:
    """Gaussian width placing g(boundary) = kappa_vib for a central coupling g0."""
    if not g0 > kappa_vib > 0:
        raise ValueError("need g0 > kappa_vib > 0 to place a weak-coupling boundary")
    return boundary / math.sqrt(2 * math.log(g0 / kappa_vib))


@dataclass(frozen=True)
class ModeProfile:
    """Radially symmetric normalized field ``u(r)`` with ``u(0) = 1``.

    ``kind='analytic'`` is the Gaussian ``exp(-r^2 / 2 w^2)``; ``kind='tabulated'``
    interpolates linearly between samples and refuses to extrapolate.
    """

    kind: str = "analytic"
    width: float | None = None
    r: tuple[float, ...] = ()
    u: tuple[float, ...] = ()
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind == "analytic":
            if self.width is None:
                object.__setattr__(self, "width", default_profile_width())
            if not self.width > 0:
                raise ValueError(f"profile width must be > 0, got {self.width}")
        elif self.kind == "tabulated":
            r = np.asarray(self.r, dtype=float)
            u = np.asarray(self.u, dtype=float)
            if r.size < 2 or r.shape != u.shape:
                raise ValueError("tabulated profile needs >= 2 (r, u) samples of equal length")
            if r[0] != 0.0 or np.any(np.diff(r) <= 0):
                raise ValueError("tabulated r must start at 0 and increase strictly")
            if abs(u[0]) != 1.0 or np.max(np.abs(u)) > 1.0:
                raise ValueError("tabulated u must be normalized with |u(0)| = max |u| = 1")
            object.__setattr__(self, "r", tuple(r.tolist()))
            object.__setattr__(self, "u", tuple(u.tolist()))
        else:
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @property
    def r_max(self) -> float:
        return math.inf if self.kind == "analytic" else self.r[-1]

    def __call__(self, radius: float) -> float:
        radius = abs(float(radius))
        if self.kind == "analytic":
            return math.exp(-(radius**2) / (2 * self.width**2))
        if radius > self.r[-1]:
            raise ValueError(f"position r={radius} nm outside tabulated profile (r_max={self.r[-1]} nm)")
        return float(np.interp(radius, self.r, self.u))


@lru_cache(maxsize=None)
def default_profile_width() -> float:
    g0 = coupling_strength(NanocavityParams(), EmitterSpec(), None)
    return weak_coupling_width(g0, C.DEFAULT_KAPPA_VIB)


def load_mode_profile(path: str | Path) -> ModeProfile:
    """Read a ``# mode-profile v1`` two-column file (r_nm, u)."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != "# mode-profile v1":
        raise ValueError(f"{path}:1: expected header '# mode-profile v1'")
    rs, us = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected two columns 'r_nm u'")
        try:
            rs.append(float(parts[0]))
            us.append(float(parts[1]))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric entry {text!r}") from None
    return ModeProfile(kind="tabulated", r=tuple(rs), u=tuple(us), source=str(path))


def write_mode_profile(path: str | Path, r, u) -> None:
    rows = "\n".join(f"{ri!r} {ui!r}" for ri, ui in zip(r, u))
    Path(path).write_text(f"# mode-profile v1\n{rows}\n")


def coupling_strength(cav: NanocavityParams, em: EmitterSpec, profile: ModeProfile | None) -> float:
    """Emitter-mode coupling g in meV; dipole assumed parallel to the mode field."""
    u = 1.0 if profile is None else profile(em.radius)
    g_joule = coupling_prefactor(cav) * em.dipole * DEBYE_CM * u
    return abs(g_joule) / _J_PER_MEV


def emitter_couplings(cav, emitters, profile, g0: float | None = None, scale: float = 1.0) -> list[float]:
    """Coupling per emitter; ``g0`` replaces the field prefactor times dipole."""
    if g0 is None:
        return [scale * coupling_strength(cav, em, profile) for em in emitters]
    return [scale * g0 * abs(profile(em.radius)) for em in emitters]


def in_coupling(cav: NanocavityParams, sigma_ext: float | None = None) -> float:
    """kappa_in = kappa_out c0 sigma_ext / 2, making the on-resonance quantum and
    classical extinction cross-sections equal."""
    sigma = cav.sigma_ext_classical if sigma_ext is None else sigma_ext
    return cav.kappa_out * C.C0_NM_PER_FS * sigma / 2


def effective_coupling(emitters, profile: ModeProfile) -> float:
    """g_E / g_0 = sqrt(sum_j u(r_j)^2)."""
    if not emitters:
        raise ValueError("effective coupling needs at least one emitter")
    return math.sqrt(math.fsum(profile(em.radius) ** 2 for em in emitters))


def drive_for_photon_number(cav: NanocavityParams, drive: DriveSpec, n_photons: float) -> float:
    """Empty-cavity calibration of the coherent amplitude for a mean photon number."""
    if n_photons < 0:
        raise ValueError(f"photon number must be >= 0, got {n_photons}")
    if not drive.kappa_in > 0:
        raise ValueError("drive.kappa_in must be > 0")
    detuning = cav.omega_cav - drive.omega_p
    return math.sqrt(n_photons * (cav.kappa_out**2 + detuning**2) / drive.kappa_in)


def make_drive(cav: NanocavityParams, omega_p: float, alpha: float | None = None,
               photon_number: float | None = None) -> DriveSpec:
    """DriveSpec with kappa_in from the in-coupling calibration.

    Without an explicit ``alpha`` the amplitude is calibrated on the bare cavity
    resonance so that the empty cavity holds ``photon_number`` photons.
    """
    drive = DriveSpec(omega_p=omega_p, kappa_in=in_coupling(cav))
    if alpha is None:
        n = C.DEFAULT_PHOTON_NUMBER if photon_number is None else photon_number
        alpha = drive_for_photon_number(cav, replace(drive, omega_p=cav.omega_cav), n)
    return replace(drive, alpha=alpha)


def build_hamiltonian(spec: HilbertSpec, cav: NanocavityParams, emitters, profile: ModeProfile | None,
                      drive: DriveSpec | None = None, couplings=None) -> sp.csr_matrix:
    """System Hamiltonian in the frame rotating at the drive frequency (meV).

    Without a drive the first emitter's transition sets the frame.
    """
    if spec.n_emitters != len(emitters):
        raise ValueError(f"spec has {spec.n_emitters} emitters but {len(emitters)} were given")
    if couplings is None:
        couplings = emitter_couplings(cav, emitters, profile)
    if drive is not None:
        omega_p = drive.omega_p
    else:
        omega_p = emitters[0].omega_qe if emitters else cav.omega_cav

    # products of sector-restricted operators differ from the restricted product
    full = spec.full()
    h = sp.csr_matrix((full.dim, full.dim), dtype=complex)
    if spec.n_max >= 1:
        a = hs.annihilation(full)
        adag = hs.dagger(a)
        h = h + (cav.omega_cav - omega_p) * (adag @ a)
    for j, (em, g) in enumerate(zip(emitters, couplings), start=1):
        h = h + 0.5 * (em.omega_qe - omega_p) * hs.pauli(full, "z", j)
        if g != 0.0:
            if spec.n_max < 1:
                raise ValueError("coupling to the cavity needs n_max >= 1")
            sm, spl = hs.pauli(full, "minus", j), hs.pauli(full, "plus", j)
            h = h + g * (adag @ sm + a @ spl)
    if drive is not None and drive.alpha != 0.0:
        if spec.n_max < 1:
            raise ValueError("a coherent drive needs n_max >= 1")
        if spec.truncated:
            log.warning("coherent drive in a sector-truncated space is an approximation")
        amp = math.sqrt(drive.kappa_in) * drive.alpha
        h = h + 1j * amp * (a - adag)
    return hs.restrict(spec, h)


def symmetric_pair(x: float, **kw) -> list[EmitterSpec]:
    return [EmitterSpec(position=(-x, 0.0), **kw), EmitterSpec(position=(x, 0.0), **kw)]


def asymmetric_pair(x: float, **kw) -> list[EmitterSpec]:
    return [EmitterSpec(position=(0.0, 0.0), **kw), EmitterSpec(position=(x, 0.0), **kw)]


def ring(n: int, radius: float, **kw) -> list[EmitterSpec]:
    return [
        EmitterSpec(position=(radius * math.cos(2 * math.pi * k / n), radius * math.sin(2 * math.pi * k / n)), **kw)
        for k in range(n)
    ]


def encircled(n: int, radius: float, **kw) -> list[EmitterSpec]:
    """One central emitter surrounded by ``n - 1`` on a ring."""
    return [EmitterSpec(position=(0.0, 0.0), **kw)] + ring(n - 1, radius, **kw)


PLACEMENTS = {
    "symmetric_pair": lambda n, x, **kw: symmetric_pair(x, **kw),
    "asymmetric_pair": lambda n, x, **kw: asymmetric_pair(x, **kw),
    "ring": ring,
    "encircled": encircled,
}


def place_emitters(placement: str, n: int, distance: float, **kw) -> list[EmitterSpec]:
    if placement not in PLACEMENTS:
        raise ValueError(f"unknown placement {placement!r}; expected one of {sorted(PLACEMENTS)}")
    if placement.endswith("_pair") and n != 2:
        raise ValueError(f"placement {placement!r} needs exactly 2 emitters, got {n}")
    if placement == "encircled" and n < 2:
        raise ValueError("encircled placement needs at least 2 emitters")
    return PLACEMENTS[placement](n, distance, **kw)
