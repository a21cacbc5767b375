"""Measurable quantities: expectations, extinction, bright/dark populations,
Rabi frequencies, decay-rate fits and the analytic hybrid-state energies."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.optimize as opt
import scipy.sparse as sp

from plasmon_cqed import hilbert as hs
from plasmon_cqed.constants import C0_NM_PER_FS, HBAR_MEV_FS
from plasmon_cqed.hilbert import HilbertSpec


def expectation(op, rho: np.ndarray) -> complex:
    """Tr[O rho]."""
    rho = np.asarray(rho)
    if op.shape != rho.shape:
        raise ValueError(f"operator shape {op.shape} does not match state shape {rho.shape}")
    if sp.issparse(op):
        return complex(op.multiply(rho.T).sum())
    return complex(np.einsum("ij,ji->", op, rho))


def extinction_empty(cav, drive) -> float:
    """Quantum extinction cross-section (nm^2) of the bare driven cavity."""
    detuning = cav.omega_cav - drive.omega_p
    return 2 * drive.kappa_in * cav.kappa_out / C0_NM_PER_FS / (cav.kappa_out**2 + detuning**2)


def extinction_driven(rho_ss: np.ndarray, drive, spec: HilbertSpec) -> float:
    """-2 sqrt(kappa_in) Re<a> / (c0 alpha) from a driven steady state."""
    if not drive.alpha > 0:
        raise ValueError("extinction from <a> needs a nonzero drive amplitude")
    a_mean = expectation(hs.annihilation(spec), rho_ss)
    return -2 * math.sqrt(drive.kappa_in) * a_mean.real / (C0_NM_PER_FS * drive.alpha)


def _single_excitation_indices(spec: HilbertSpec) -> list[int]:
    return [spec.index(0, (j,)) for j in range(1, spec.n_emitters + 1)]


def bright_dark_populations(rho: np.ndarray, spec: HilbertSpec) -> tuple[float, float]:
    """Populations of the symmetric (bright) single-excitation state and of the
    single-excitation manifold orthogonal to it. For two emitters these are
    P_S and P_A."""
    if spec.n_emitters < 2:
        raise ValueError("bright/dark decomposition needs at least 2 emitters")
    idx = _single_excitation_indices(spec)
    block = np.asarray(rho)[np.ix_(idx, idx)]
    n = len(idx)
    p_bright = float(np.real(block.sum()) / n)
    p_manifold = float(np.real(np.trace(block)))
    return p_bright, p_manifold - p_bright


def antisymmetric_population(rho: np.ndarray, spec: HilbertSpec) -> float:
    """<A|rho|A> with |A> = (|0,e,g> - |0,g,e>)/sqrt(2) over emitters 1 and 2."""
    i, j = spec.index(0, (1,)), spec.index(0, (2,))
    return float(0.5 * np.real(rho[i, i] + rho[j, j] - rho[i, j] - rho[j, i]))


@dataclass
class TimeSeries:
    """Observable records along a trajectory (times in fs)."""

    times: np.ndarray
    channels: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must increase strictly")
        for name, values in self.channels.items():
            if len(values) != len(self.times):
                raise ValueError(f"channel {name!r} has {len(values)} samples, expected {len(self.times)}")

    def __getitem__(self, name):
        return self.channels[name]


def channel_operators(spec: HilbertSpec) -> dict[str, sp.csr_matrix]:
    return dict(_channel_operators(spec))


@lru_cache(maxsize=64)
def _channel_operators(spec: HilbertSpec) -> dict[str, sp.csr_matrix]:
    ops = {}
    if spec.n_max >= 1:
        ops["photon_number"] = hs.number(spec)
    for j in range(1, spec.n_emitters + 1):
        ops[f"emitter_population_{j}"] = hs.pauli(spec, "plus", j) @ hs.pauli(spec, "minus", j)
    return ops


def state_channels(rho: np.ndarray, spec: HilbertSpec, ops=None) -> dict[str, float]:
    """Every scalar channel of one density matrix."""
    ops = channel_operators(spec) if ops is None else ops
    out = {name: expectation(op, rho).real for name, op in ops.items()}
    if spec.n_max >= 1:
        a_mean = expectation(hs._cached(spec, "a"), rho)
        out["re_a"], out["im_a"] = a_mean.real, a_mean.imag
    if spec.n_emitters >= 2:
        out["P_bright"], out["P_dark"] = bright_dark_populations(rho, spec)
    if spec.n_emitters == 2:
        out["P_S"] = out["P_bright"]
        out["P_A"] = antisymmetric_population(rho, spec)
    return out


def time_series(trajectory) -> TimeSeries:
    spec = trajectory.spec
    ops = channel_operators(spec)
    rows = [state_channels(rho, spec, ops) for rho in trajectory.states]
    names = list(rows[0]) if rows else []
    return TimeSeries(trajectory.times, {k: np.array([r[k] for r in rows]) for k in names})


@dataclass(frozen=True)
class HybridStates:
    omega_plus: complex
    omega_minus: complex

    @property
    def splitting(self) -> float:
        return abs(self.omega_plus.real - self.omega_minus.real)


def hybrid_states_analytic(omega_e: complex, omega_cav: complex, g: float, volume_ratio: float = 0.0) -> HybridStates:
    """Complex hybrid-state energies of one emitter and the cavity mode.

    ``omega_e`` and ``omega_cav`` carry their losses as negative imaginary parts.
    """
    mean = 0.5 * (omega_e + omega_cav)
    root = cmath.sqrt(g**2 * (1 - 1j * volume_ratio) + (0.5 * (omega_e - omega_cav)) ** 2)
    return HybridStates(mean + root, mean - root)


def hybrid_states_for(cav, em, g: float, emitter_linewidth: float | None = None) -> HybridStates:
    """``hybrid_states_analytic`` from parameter records; the emitter linewidth
    defaults to ``kappa_vib``."""
    width = em.kappa_vib if emitter_linewidth is None else emitter_linewidth
    return hybrid_states_analytic(
        em.omega_qe - 1j * width, cav.omega_cav - 1j * cav.kappa_out, g, cav.volume_ratio
    )


@dataclass(frozen=True)
class RabiEstimate:
    status: str
    omega: float | None = None
    decay_rate: float | None = None
    n_extrema: int = 0

    @property
    def overdamped(self) -> bool:
        return self.status == "overdamped"


def count_extrema(values: np.ndarray, floor: float) -> int:
    """Local extrema whose step from the previous extremum exceeds ``floor``."""
    values = np.asarray(values, dtype=float)
    d = np.diff(values)
    turning = np.nonzero(np.sign(d[1:]) * np.sign(d[:-1]) < 0)[0] + 1
    count, last = 0, values[0]
    for i in turning:
        if abs(values[i] - last) > floor:
            count += 1
            last = values[i]
    return count


def _damped_basis(t, gamma, omega):
    env = np.exp(-gamma * t)
    return np.column_stack([env, env * np.cos(omega * t), env * np.sin(omega * t), np.ones_like(t)])


def _linear_residual(t, y, gamma, omega):
    basis = _damped_basis(t, gamma, omega)
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return y - basis @ coef, coef


def rabi_frequency(times, values, noise_floor: float = 1e-6) -> RabiEstimate:
    """Dominant oscillation frequency (meV) of a damped channel.

    A zero-padded DFT of the mean-removed signal with parabolic peak
    interpolation seeds a least-squares fit of
    ``exp(-gamma t) (A + B cos wt + C sin wt) + D``.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    n_ext = count_extrema(y, noise_floor)
    if n_ext < 3:
        return RabiEstimate("overdamped", n_extrema=n_ext)

    dt = float(np.mean(np.diff(t)))
    pad = 16 * len(y)
    spectrum = np.abs(np.fft.rfft(y - y.mean(), n=pad))
    freqs = 2 * np.pi * np.fft.rfftfreq(pad, d=dt)
    k = int(np.argmax(spectrum[1:])) + 1
    if 1 <= k < len(spectrum) - 1:
        lo, mid, hi = np.log(spectrum[k - 1 : k + 2] + 1e-300)
        denom = lo - 2 * mid + hi
        shift = 0.5 * (lo - hi) / denom if denom != 0 else 0.0
        omega_fft = freqs[k] + shift * (freqs[1] - freqs[0])
    else:
        omega_fft = freqs[k]

    # envelope guess from successive extrema
    scale = np.max(np.abs(y)) or 1.0
    span = t[-1] - t[0]
    best = None
    for omega0 in (omega_fft, 0.5 * omega_fft, 2 * omega_fft):
        for gamma0 in np.geomspace(0.1 / span, 20.0 / span, 12):
            r, _ = _linear_residual(t, y, gamma0, omega0)
            cost = float(r @ r)
            if best is None or cost < best[0]:
                best = (cost, gamma0, omega0)
    _, gamma0, omega0 = best

    def residual(p):
        return _linear_residual(t, y, p[0], p[1])[0] / scale

    fit = opt.least_squares(residual, x0=[gamma0, omega0], x_scale=[gamma0, omega0], xtol=1e-14, ftol=1e-14)
    gamma, omega = fit.x
    return RabiEstimate("ok", omega=abs(omega) * HBAR_MEV_FS, decay_rate=gamma * HBAR_MEV_FS, n_extrema=n_ext)


def fit_decay_rate(times, values, t_start: float, t_stop: float | None = None, floor: float = 1e-12) -> float:
    """Exponential decay rate (meV) from a log-linear fit on [t_start, t_stop]."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    mask = (t >= t_start) & (y > floor)
    if t_stop is not None:
        mask &= t <= t_stop
    if mask.sum() < 3:
        raise ValueError("fewer than 3 samples in the decay-fit window")
    slope = np.polyfit(t[mask], np.log(y[mask]), 1)[0]
    return -slope * HBAR_MEV_FS
