"""Assemble a system from a RunConfig and run time evolutions or steady states."""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from plasmon_cqed import hilbert as hs
from plasmon_cqed import observables as obs
from plasmon_cqed.cavity import (
    DriveSpec,
    EmitterSpec,
    build_hamiltonian,
    emitter_couplings,
    in_coupling,
    make_drive,
)
from plasmon_cqed.config import RunConfig
from plasmon_cqed.hilbert import HilbertSpec
from plasmon_cqed.lindblad import (
    Liouvillian,
    SolverError,
    Trajectory,
    build_liouvillian,
    density_diagnostics,
    evolve,
    steady_state,
)

log = logging.getLogger(__name__)

CONVERGENCE_TOL = 1e-8
# doubled-n_max reruns above this superoperator size are skipped
CONVERGENCE_MAX_SUPERDIM = 1_000_000


@dataclass
class System:
    spec: HilbertSpec
    couplings: list[float]
    drive: DriveSpec | None
    liouvillian: Liouvillian


def resolve_drive(config: RunConfig) -> DriveSpec | None:
    if config.drive is None:
        return None
    d = config.drive
    return make_drive(config.cavity, d.omega_p, alpha=d.alpha, photon_number=d.photon_number)


def resolve_couplings(config: RunConfig, coupling_cavity=None) -> list[float]:
    """Per-emitter g (meV). ``coupling_cavity`` pins the field prefactor, so that
    detuning sweeps keep g fixed."""
    cav = config.cavity if coupling_cavity is None else coupling_cavity
    return emitter_couplings(cav, config.emitters, config.profile, config.model.g0, config.model.g_scale)


def build_system(config: RunConfig, n_max: int | None = None, coupling_cavity=None) -> System:
    m = config.model
    spec = HilbertSpec(m.n_max if n_max is None else n_max, len(config.emitters), m.sector_cap)
    drive = resolve_drive(config)
    couplings = resolve_couplings(config, coupling_cavity)
    h = build_hamiltonian(spec, config.cavity, config.emitters, config.profile, drive, couplings)
    liou = build_liouvillian(h, spec, config.cavity, config.emitters, m.dephasing)
    return System(spec, couplings, drive, liou)


def initial_density(config: RunConfig, spec: HilbertSpec) -> np.ndarray:
    state = config.initial.state
    if state == "ground":
        return hs.basis_density(spec, 0)
    if state == "photon":
        if spec.n_max < 1:
            raise ValueError("initial photon state needs n_max >= 1")
        return hs.basis_density(spec, 1)
    m = re.fullmatch(r"emitter:(\d+)", state)
    if m:
        return hs.basis_density(spec, 0, (int(m.group(1)),))
    # custom: amplitudes over |0,g..g>, |1,g..g>, |0,e_1>, ..., |0,e_N>
    amps = config.initial.amplitudes
    ket = np.zeros(spec.dim, dtype=complex)
    ket[spec.index(0)] += amps[0]
    if amps[1] != 0:
        ket[spec.index(1)] += amps[1]
    for j, c in enumerate(amps[2:], start=1):
        ket[spec.index(0, (j,))] += c
    return hs.ket_density(ket)


@dataclass
class Hygiene:
    """Worst-case density-matrix diagnostics over a set of states."""

    trace_error: float = 0.0
    hermiticity_error: float = 0.0
    min_eigenvalue: float = math.inf
    n_states: int = 0

    def update(self, rho: np.ndarray) -> None:
        d = density_diagnostics(rho)
        self.trace_error = max(self.trace_error, d["trace_error"])
        self.hermiticity_error = max(self.hermiticity_error, d["hermiticity_error"])
        self.min_eigenvalue = min(self.min_eigenvalue, d["min_eigenvalue"])
        self.n_states += 1

    def merge(self, other: "Hygiene") -> None:
        self.trace_error = max(self.trace_error, other.trace_error)
        self.hermiticity_error = max(self.hermiticity_error, other.hermiticity_error)
        self.min_eigenvalue = min(self.min_eigenvalue, other.min_eigenvalue)
        self.n_states += other.n_states

    def ok(self, trace_tol=1e-9, herm_tol=1e-10, pos_tol=1e-8) -> bool:
        return (
            self.n_states > 0
            and self.trace_error <= trace_tol
            and self.hermiticity_error <= herm_tol
            and self.min_eigenvalue >= -pos_tol
        )

    @classmethod
    def of(cls, states) -> "Hygiene":
        h = cls()
        for rho in states:
            h.update(rho)
        return h


@dataclass
class SimulationResult:
    series: obs.TimeSeries
    trajectory: Trajectory
    system: System
    hygiene: Hygiene
    convergence: dict[str, object] = field(default_factory=dict)


def _channel_drift(a: dict, b: dict) -> float:
    common = [k for k in a if k in b]
    return max((float(np.max(np.abs(np.asarray(a[k]) - np.asarray(b[k])))) for k in common), default=0.0)


def _guard_needed(config: RunConfig, spec: HilbertSpec) -> str | None:
    """Reason to skip the doubled-n_max rerun, or None to run it."""
    m = config.model
    if not m.convergence_check:
        return "disabled"
    if m.sector_cap is not None and m.sector_cap <= m.n_max:
        return "sector cap binds"
    doubled = HilbertSpec(2 * m.n_max, spec.n_emitters, m.sector_cap)
    if doubled.dim**2 > CONVERGENCE_MAX_SUPERDIM:
        return "doubled space too large"
    return None


def _check_drift(drift: float, what: str) -> None:
    if not drift < CONVERGENCE_TOL:
        raise SolverError(
            f"{what} changes by {drift:.3e} when n_max is doubled (limit {CONVERGENCE_TOL:g}); increase n_max"
        )


def simulate(config: RunConfig, check_convergence: bool = True) -> SimulationResult:
    system = build_system(config)
    rho0 = initial_density(config, system.spec)
    traj = evolve(system.liouvillian, rho0, config.evolution)
    series = obs.time_series(traj)
    result = SimulationResult(series, traj, system, Hygiene.of(traj.states))
    skip = _guard_needed(config, system.spec) if check_convergence else "disabled"
    if skip is None:
        big = build_system(config, n_max=2 * config.model.n_max)
        traj2 = evolve(big.liouvillian, initial_density(config, big.spec), config.evolution)
        drift = _channel_drift(series.channels, obs.time_series(traj2).channels)
        result.convergence = {"status": "checked", "drift": drift}
        _check_drift(drift, "trajectory")
    else:
        result.convergence = {"status": f"skipped ({skip})", "drift": float("nan")}
    return result


@dataclass
class SteadyResult:
    values: dict[str, float]
    rho: np.ndarray
    system: System
    hygiene: Hygiene
    convergence: dict[str, object] = field(default_factory=dict)


def steady_values(rho: np.ndarray, system: System, config: RunConfig) -> dict[str, float]:
    values = obs.state_channels(rho, system.spec)
    drive = system.drive
    if drive is not None and drive.alpha > 0 and system.spec.n_max >= 1:
        values["extinction"] = obs.extinction_driven(rho, drive, system.spec)
        values["extinction_empty"] = obs.extinction_empty(config.cavity, drive)
    return values


def steady(config: RunConfig, check_convergence: bool = True, coupling_cavity=None) -> SteadyResult:
    system = build_system(config, coupling_cavity=coupling_cavity)
    rho = steady_state(system.liouvillian)
    result = SteadyResult(steady_values(rho, system, config), rho, system, Hygiene.of([rho]))
    skip = _guard_needed(config, system.spec) if check_convergence else "disabled"
    if skip is None:
        big = build_system(config, n_max=2 * config.model.n_max, coupling_cavity=coupling_cavity)
        values2 = steady_values(steady_state(big.liouvillian), big, config)
        # extinction carries nm^2 units; compare the dimensionless channels only
        drift = _channel_drift(
            {k: v for k, v in result.values.items() if not k.startswith("extinction")}, values2
        )
        result.convergence = {"status": "checked", "drift": drift}
        _check_drift(drift, "steady state")
    else:
        result.convergence = {"status": f"skipped ({skip})", "drift": float("nan")}
    return result


def central_coupling(config: RunConfig) -> float | None:
    """g for emitter 1's dipole at the field maximum (the reference g0)."""
    if not config.emitters:
        return None
    em = replace(config.emitters[0], position=(0.0, 0.0))
    probe = replace(config, emitters=(em,))
    return resolve_couplings(probe)[0]


def derived_quantities(config: RunConfig) -> dict[str, float]:
    """Header quantities: couplings, in-coupling, drive amplitude and coupling ratios."""
    out: dict[str, float] = {}
    out["kappa_in"] = in_coupling(config.cavity)
    drive = resolve_drive(config)
    if drive is not None:
        out["alpha"] = drive.alpha
    g0 = central_coupling(config)
    if g0 is None:
        return out
    kout = config.cavity.kappa_out
    kvib = config.emitters[0].kappa_vib
    out["g0"] = g0
    for j, g in enumerate(resolve_couplings(config), start=1):
        out[f"g_{j}"] = g
    out["g0_over_kappa_vib"] = g0 / kvib if kvib > 0 else math.inf
    out["g0_over_kappa_out"] = g0 / kout
    out["g0sq_over_kappa_out_kappa_vib"] = g0**2 / (kout * kvib) if kvib > 0 else math.inf
    return out


def emitter_template(config: RunConfig) -> dict:
    """Physical properties of emitter 1, reused by placement helpers."""
    em = config.emitters[0] if config.emitters else EmitterSpec(omega_qe=config.cavity.omega_cav)
    return {"omega_qe": em.omega_qe, "kappa_vib": em.kappa_vib, "dipole": em.dipole}
