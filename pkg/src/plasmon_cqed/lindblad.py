"""Liouvillian assembly, time evolution and steady states of the master equation.

The generator is stored in meV (hbar = 1). Evolution takes times in fs and
divides the generator by ``HBAR_MEV_FS``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from plasmon_cqed import hilbert as hs
from plasmon_cqed.constants import HBAR_MEV_FS
from plasmon_cqed.hilbert import HilbertSpec

log = logging.getLogger(__name__)

# (sandwich rate, anticommutator rate) per unit kappa_vib for the sigma_z dissipator.
DEPHASING = {
    "literal": (1.0, 0.5),
    "half_rate": (0.5, 0.25),
}

EXPM_MAX_SUPERDIM = 10_000
STEADY_MAX_SUPERDIM = 20_000_000


class IntegrationError(RuntimeError):
    pass


class SolverError(RuntimeError):
    pass


def coherence_decay_rate(kappa_vib: float, dephasing: str = "literal") -> float:
    """Decay rate (meV) of an emitter's ground/excited coherence from dephasing alone."""
    return 2.0 * DEPHASING[dephasing][0] * kappa_vib


@dataclass(frozen=True)
class Liouvillian:
    spec: HilbertSpec
    superop: sp.csr_matrix

    @property
    def dim(self) -> int:
        return self.spec.dim

    def per_fs(self) -> sp.csr_matrix:
        return (self.superop / HBAR_MEV_FS).tocsr()

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """d rho / dt in meV units."""
        return hs.devectorize(self.superop @ hs.vectorize(rho), self.dim)


def _left(op, eye):
    return sp.kron(eye, op, format="csr")


def _right(op, eye):
    return sp.kron(op.T, eye, format="csr")


@lru_cache(maxsize=64)
def _unit_dissipators(spec: HilbertSpec, dephasing: str):
    """Cavity and per-emitter dissipators at unit rate (cached per space)."""
    d = spec.dim
    eye = sp.identity(d, dtype=complex, format="csr")
    cavity = None
    if spec.n_max >= 1:
        a = hs.annihilation(spec)
        n = hs.dagger(a) @ a
        cavity = 2 * sp.kron(a.conj(), a, format="csr") - (_left(n, eye) + _right(n, eye))
    sandwich, anti = DEPHASING[dephasing]
    emitters = []
    for j in range(1, spec.n_emitters + 1):
        sz = hs.pauli(spec, "z", j)
        sz2 = sz @ sz
        emitters.append(sandwich * sp.kron(sz.conj(), sz, format="csr") - anti * (_left(sz2, eye) + _right(sz2, eye)))
    return cavity, tuple(emitters)


def build_liouvillian(h: sp.spmatrix, spec: HilbertSpec, cav, emitters, dephasing: str = "literal") -> Liouvillian:
    """Superoperator of

        -i[H, rho] + 2 k_out a rho a^+ - k_out {a^+ a, rho}
        + sum_j k_vib sigma_z rho sigma_z - (k_vib / 2) {sigma_z^2, rho}

    with the dephasing prefactors scaled by ``DEPHASING[dephasing]``.
    """
    h = sp.csr_matrix(h, dtype=complex)
    d = spec.dim
    if h.shape != (d, d):
        raise ValueError(f"Hamiltonian shape {h.shape} does not match dimension {d}")
    if dephasing not in DEPHASING:
        raise ValueError(f"unknown dephasing convention {dephasing!r}")
    if len(emitters) != spec.n_emitters:
        raise ValueError(f"spec has {spec.n_emitters} emitters but {len(emitters)} were given")
    herm_err = abs(h - hs.dagger(h)).max() if h.nnz else 0.0
    if herm_err > 1e-12:
        raise ValueError(f"Hamiltonian is not Hermitian (max deviation {herm_err:.3e})")

    eye = sp.identity(d, dtype=complex, format="csr")
    out = -1j * (_left(h, eye) - _right(h, eye))
    cavity_unit, emitter_units = _unit_dissipators(spec, dephasing)
    if cavity_unit is not None:
        out = out + cav.kappa_out * cavity_unit
    for em, unit in zip(emitters, emitter_units):
        if em.kappa_vib != 0:
            out = out + em.kappa_vib * unit
    out.sum_duplicates()
    out.eliminate_zeros()
    out.sort_indices()
    return Liouvillian(spec, out.tocsr())


@dataclass(frozen=True)
class EvolutionConfig:
    """Integrator settings; snapshots are taken every ``dt_initial * record_stride`` fs."""

    t_max: float
    dt_initial: float = 0.05
    method: str = "rk45_adaptive"
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    record_stride: int = 10

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError(f"t_max must be > 0, got {self.t_max}")
        if not self.dt_initial > 0:
            raise ValueError(f"dt_initial must be > 0, got {self.dt_initial}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be > 0")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.method not in ("rk4_fixed", "rk45_adaptive", "expm_propagator"):
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def record_dt(self) -> float:
        return self.dt_initial * self.record_stride

    def record_times(self) -> np.ndarray:
        n = int(math.floor(self.t_max / self.record_dt + 1e-9))
        times = self.record_dt * np.arange(n + 1)
        if self.t_max - times[-1] > 1e-9 * self.t_max:
            times = np.append(times, self.t_max)
        return times


@dataclass
class Trajectory:
    spec: HilbertSpec
    times: np.ndarray
    states: np.ndarray
    warnings: list[str] = field(default_factory=list)
    n_steps: int = 0

    def __len__(self):
        return len(self.times)


def density_diagnostics(rho: np.ndarray) -> dict[str, float]:
    """Trace, Hermiticity and positivity residuals of a density matrix."""
    return {
        "trace_error": abs(np.trace(rho) - 1.0),
        "hermiticity_error": float(np.max(np.abs(rho - rho.conj().T))) if rho.size else 0.0,
        "min_eigenvalue": float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()),
    }


def check_density_matrix(rho: np.ndarray, spec: HilbertSpec | None = None, herm_tol=1e-12,
                         trace_tol=1e-9, pos_tol=1e-9) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if spec is not None and rho.shape != (spec.dim, spec.dim):
        raise ValueError(f"density matrix shape {rho.shape} does not match dimension {spec.dim}")
    diag = density_diagnostics(rho)
    if diag["hermiticity_error"] > herm_tol:
        raise ValueError(f"density matrix not Hermitian ({diag['hermiticity_error']:.3e})")
    if diag["trace_error"] > trace_tol:
        raise ValueError(f"density matrix trace deviates from 1 by {diag['trace_error']:.3e}")
    if diag["min_eigenvalue"] < -pos_tol:
        raise ValueError(f"density matrix has negative eigenvalue {diag['min_eigenvalue']:.3e}")
    return rho


def _symmetrize(y: np.ndarray, d: int) -> np.ndarray:
    rho = y.reshape(d, d, order="F")
    return (0.5 * (rho + rho.conj().T)).reshape(-1, order="F")


# Dormand-Prince 5(4) tableau.
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _dp45_step(f, y, h):
    ks = []
    for row in _A:
        yi = y
        for aij, kj in zip(row, ks):
            if aij:
                yi = yi + h * aij * kj
        ks.append(f(yi))
    y_new = y + h * sum(b * k for b, k in zip(_B5, ks) if b)
    err = h * sum(e * k for e, k in zip(_E, ks) if e)
    return y_new, err


def _rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def iter_evolve(liou: Liouvillian, rho0: np.ndarray, config: EvolutionConfig, warnings: list | None = None):
    """Yield ``(t, rho)`` at every record time, starting with ``(0, rho0)``."""
    d = liou.dim
    rho0 = check_density_matrix(rho0, liou.spec, herm_tol=1e-10)
    gen = liou.per_fs()
    f = gen.__matmul__
    times = config.record_times()
    y = hs.vectorize(rho0).astype(complex)
    warnings = [] if warnings is None else warnings
    check_positivity = d <= 256

    def snapshot(t, vec):
        rho = hs.devectorize(vec, d).copy()
        if check_positivity:
            lam = np.linalg.eigvalsh(rho).min()
            if lam < -1e-6:
                warnings.append(f"t={t:.6g} fs: min eigenvalue {lam:.3e} below -1e-6")
        return t, rho

    yield snapshot(0.0, y)

    if config.method == "expm_propagator":
        step_cache = {}
        for t_prev, t_next in zip(times[:-1], times[1:]):
            dt = float(t_next - t_prev)
            key = round(dt, 12)
            if key not in step_cache:
                step_cache[key] = propagator_expm(liou, dt)
            y = _symmetrize(step_cache[key] @ y, d)
            yield snapshot(float(t_next), y)
        return

    if config.method == "rk4_fixed":
        t = 0.0
        for t_next in times[1:]:
            n_sub = max(1, int(round((t_next - t) / config.dt_initial)))
            h = (t_next - t) / n_sub
            for _ in range(n_sub):
                y = _symmetrize(_rk4_step(f, y, h), d)
            t = float(t_next)
            yield snapshot(t, y)
        return

    t = 0.0
    h = config.dt_initial
    h_min = 1e-12 * max(1.0, config.t_max)
    for t_next in times[1:]:
        while t < t_next - 1e-12 * max(1.0, t_next):
            h_try = min(h, t_next - t)
            y_new, err = _dp45_step(f, y, h_try)
            scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.max(np.abs(err) / scale))
            if err_norm <= 1.0:
                t += h_try
                y = _symmetrize(y_new, d)
                grow = 5.0 if err_norm == 0 else min(5.0, 0.9 * err_norm ** -0.2)
                # a step clipped to land on a record time says little about the next one
                if h_try >= h:
                    h = h_try * grow
            else:
                h = h_try * max(0.2, 0.9 * err_norm ** -0.2)
                if h < h_min:
                    raise IntegrationError(
                        f"step size underflow at t={t:.6g} fs (h={h:.3e} fs, error norm {err_norm:.3e})"
                    )
        t = float(t_next)
        yield snapshot(t, y)


def evolve(liou: Liouvillian, rho0: np.ndarray, config: EvolutionConfig) -> Trajectory:
    warnings: list[str] = []
    times, states = [], []
    for t, rho in iter_evolve(liou, rho0, config, warnings):
        times.append(t)
        states.append(rho)
    for w in warnings:
        log.warning(w)
    return Trajectory(liou.spec, np.array(times), np.array(states), warnings)


def propagator_expm(liou: Liouvillian, t: float) -> np.ndarray:
    """Dense exp(L t) for ``t`` in fs (scaling and squaring)."""
    n = liou.dim**2
    if n > EXPM_MAX_SUPERDIM:
        raise ValueError(f"superoperator dimension {n} exceeds the dense propagator guard {EXPM_MAX_SUPERDIM}")
    if t == 0:
        return np.eye(n, dtype=complex)
    return la.expm(liou.per_fs().toarray() * t)


def _trace_row(d: int) -> sp.csr_matrix:
    cols = np.arange(d) * (d + 1)
    return sp.csr_matrix((np.ones(d, dtype=complex), (np.zeros(d, dtype=int), cols)), shape=(1, d * d))


def steady_state(liou: Liouvillian, residual_tol: float = 1e-10) -> np.ndarray:
    """Fixed point of L with unit trace.

    Row 0 of L is replaced by the trace functional and the system solved with
    a sparse LU. A failed or inaccurate solve falls back to long-time evolution.
    """
    d = liou.dim
    n = d * d
    if n > STEADY_MAX_SUPERDIM:
        raise ValueError(f"superoperator dimension {n} exceeds the steady-state guard")
    system = sp.vstack([_trace_row(d), liou.superop[1:]], format="csc")
    rhs = np.zeros(n, dtype=complex)
    rhs[0] = 1.0
    try:
        vec = spla.splu(system, permc_spec="COLAMD").solve(rhs)
        rho = hs.devectorize(vec, d)
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho)
        residual = float(np.max(np.abs(liou.superop @ hs.vectorize(rho))))
        if np.all(np.isfinite(rho)) and residual < residual_tol:
            return rho
        log.warning("steady-state solve residual %.3e above %.1e; falling back to evolution", residual, residual_tol)
    except RuntimeError as exc:
        log.warning("steady-state LU failed (%s); falling back to evolution", exc)
    return _steady_by_evolution(liou)


def _steady_by_evolution(liou: Liouvillian, rate_tol: float = 1e-12, max_time: float = 1e6) -> np.ndarray:
    d = liou.dim
    rho = np.zeros((d, d), dtype=complex)
    g = liou.spec.index(0, ())
    rho[g, g] = 1.0
    gen = liou.per_fs()
    chunk = 100.0
    t = 0.0
    while t < max_time:
        cfg = EvolutionConfig(t_max=chunk, dt_initial=0.05, record_stride=int(chunk / 0.05))
        *_, (_, rho) = iter_evolve(liou, rho, cfg)
        t += chunk
        rate = float(np.max(np.abs(gen @ hs.vectorize(rho))))
        if rate < rate_tol:
            return rho
        chunk = min(chunk * 2, max_time)
    raise SolverError(f"no steady state reached after {max_time:g} fs")
