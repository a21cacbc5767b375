"""Built-in acceptance suite.

Each check builds its own configuration, measures one quantity and compares
it against a fixed tolerance. ``run_checks`` returns one ``CheckResult`` per
check; the hygiene check aggregates the density-matrix diagnostics collected
by the dynamical checks 3 to 8.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import find_peaks

from plasmon_cqed import constants as C
from plasmon_cqed import observables as obs
from plasmon_cqed import runner
from plasmon_cqed.cavity import (
    DriveSpec,
    EmitterSpec,
    ModeProfile,
    NanocavityParams,
    coupling_strength,
    in_coupling,
    plasmon_lifetime,
)
from plasmon_cqed.config import DriveBlock, InitialBlock, ModelBlock, RunConfig
from plasmon_cqed.lindblad import EvolutionConfig, coherence_decay_rate, evolve
from plasmon_cqed.sweep import SweepAxis, resolve_workers, run_map

HYGIENE_TOL = {"trace": 1e-9, "hermiticity": 1e-10, "positivity": 1e-8}


@dataclass(frozen=True)
class ValidationHooks:
    """Test hooks. ``corrupt_kappa_in`` drops the factor 1/2 of the in-coupling."""

    corrupt_kappa_in: bool = False


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    measured: str
    tolerance: str
    runtime: float
    info: dict[str, object] = field(default_factory=dict)
    hygiene: runner.Hygiene | None = None

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"[{verdict}] {self.number:2d} {self.name}: measured {self.measured}; "
            f"tolerance {self.tolerance}; runtime {self.runtime:.3g} s"
        )


def _g0() -> float:
    return coupling_strength(NanocavityParams(), EmitterSpec(), None)


def _colocated(n: int, kappa_vib: float, cav: NanocavityParams | None = None) -> tuple[EmitterSpec, ...]:
    cav = cav or NanocavityParams()
    return tuple(EmitterSpec(omega_qe=cav.omega_cav, kappa_vib=kappa_vib) for _ in range(n))


def _config(emitters, initial="photon", t_max=200.0, cav=None, drive=None, **model) -> RunConfig:
    cav = cav or NanocavityParams()
    return RunConfig(
        cavity=cav,
        emitters=tuple(emitters),
        profile=ModeProfile(),
        model=ModelBlock(**model),
        drive=drive,
        initial=InitialBlock(initial),
        evolution=EvolutionConfig(t_max=t_max),
    )


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def check_extinction(hooks: ValidationHooks) -> CheckResult:
    cav = NanocavityParams()

    def compute():
        kappa_in = in_coupling(cav)
        if hooks.corrupt_kappa_in:
            kappa_in *= 2
        drive = DriveSpec(omega_p=cav.omega_cav, alpha=1.0, kappa_in=kappa_in)
        return obs.extinction_empty(cav, drive)

    compute()
    sigma, runtime = _timed(compute)
    rel = abs(sigma - cav.sigma_ext_classical) / cav.sigma_ext_classical
    return CheckResult(
        1, "extinction calibration", rel <= 1e-12 and runtime < 1e-3,
        f"rel. error {rel:.3e} (sigma {sigma:.6g} nm^2)", "1e-12 relative, < 1 ms", runtime,
    )


def check_driven_steady_state(hooks: ValidationHooks) -> CheckResult:
    cav = NanocavityParams()
    detunings = np.linspace(-200.0, 200.0, 101)
    base = _config((), initial="ground", drive=DriveBlock(omega_p=cav.omega_cav), n_max=2)

    def compute():
        worst = 0.0
        for delta in detunings:
            cfg = replace(base, cavity=replace(cav, omega_cav=cav.omega_cav + delta))
            res = runner.steady(cfg, check_convergence=False)
            drive = res.system.drive
            expected = drive.kappa_in * drive.alpha**2 / (cav.kappa_out**2 + delta**2)
            worst = max(worst, abs(res.values["photon_number"] - expected) / expected)
        return worst

    worst, runtime = _timed(compute)
    return CheckResult(
        2, "driven empty-cavity steady state", worst <= 1e-10 and runtime < 1.0,
        f"max rel. error {worst:.3e} over 101 detunings", "1e-10 relative, < 1 s", runtime,
    )


def _rabi_run(n: int, sector_cap=None, t_max=200.0):
    cfg = _config(_colocated(n, 0.0), initial="photon", t_max=t_max, sector_cap=sector_cap)
    sim = runner.simulate(cfg, check_convergence=False)
    est = obs.rabi_frequency(sim.series.times, sim.series["photon_number"])
    return est, sim


def check_rabi(hooks: ValidationHooks) -> CheckResult:
    g, kappa = _g0(), C.DEFAULT_KAPPA_OUT
    parts, hygiene, ok = [], runner.Hygiene(), True
    total = 0.0
    for n in (1, 2):
        (est, sim), runtime = _timed(lambda: _rabi_run(n))
        total += runtime
        expected = math.sqrt(4 * n * g**2 - kappa**2)
        err = abs(est.omega - expected) / expected if est.omega is not None else math.inf
        ok &= err <= 0.02 and runtime < 10.0
        hygiene.merge(sim.hygiene)
        parts.append(f"N={n}: {est.omega:.4f} vs {expected:.4f} meV (rel. {err:.2e}, {runtime:.2f} s)")
    return CheckResult(
        3, "Rabi frequencies", ok, "; ".join(parts), "2% relative, < 10 s each", total, hygiene=hygiene,
    )


def check_dark_state(hooks: ValidationHooks) -> CheckResult:
    cav = NanocavityParams()
    tau = plasmon_lifetime(cav)
    cfg = _config(_colocated(2, 0.0), initial="emitter:1", t_max=20 * tau)
    sim, runtime = _timed(lambda: runner.simulate(cfg, check_convergence=False))
    s = sim.series
    late = s.times >= 10 * tau - 1e-9
    dev_a = float(np.max(np.abs(s["P_A"][late] - 0.5)))
    dev_pop = max(float(np.max(np.abs(s[f"emitter_population_{j}"][late] - 0.25))) for j in (1, 2))
    i10 = int(np.argmax(late))
    pop_dev = np.max([np.abs(s[f"emitter_population_{j}"] - 0.25) for j in (1, 2)], axis=0)
    outside = np.nonzero(pop_dev > 1e-3)[0]
    settle = s.times[outside[-1] + 1] if len(outside) and outside[-1] + 1 < len(s.times) else math.nan
    info = {
        "populations_settle_within_1e-3_after_lifetimes": settle / tau,
        "plasmon_lifetime_fs": tau,
        "emitter_population_1_at_10_lifetimes": float(s["emitter_population_1"][i10]),
        "P_S_final": float(s["P_S"][-1]),
    }
    return CheckResult(
        4, "dark-state formation", dev_a <= 1e-3 and dev_pop <= 1e-3 and runtime < 30.0,
        f"max |P_A-0.5| {dev_a:.2e}, max |P_j-0.25| {dev_pop:.2e} for t >= 10 lifetimes ({10 * tau:.1f} fs)",
        "1e-3, < 30 s", runtime, info=info, hygiene=sim.hygiene,
    )


DARK_FIT_WINDOW = (100.0, 300.0)


def _dark_decay_rate(kappa_vib: float, kappa_out: float):
    cav = NanocavityParams(kappa_out=kappa_out)
    cfg = _config(_colocated(2, kappa_vib, cav), initial="emitter:1", t_max=DARK_FIT_WINDOW[1], cav=cav,
                  sector_cap=1)
    sim = runner.simulate(cfg, check_convergence=False)
    rate = obs.fit_decay_rate(sim.series.times, sim.series["P_A"], *DARK_FIT_WINDOW)
    return rate, sim.hygiene


def _photon_decay_rate(cav: NanocavityParams) -> float:
    cfg = _config((), initial="photon", t_max=50.0, cav=cav, n_max=1)
    sim = runner.simulate(cfg, check_convergence=False)
    return obs.fit_decay_rate(sim.series.times, sim.series["photon_number"], 0.0, 50.0)


def check_dark_robustness(hooks: ValidationHooks) -> CheckResult:
    t0 = time.perf_counter()
    kout = C.DEFAULT_KAPPA_OUT
    hygiene = runner.Hygiene()
    rates, changes = {}, {}
    for kv in (12.5, 25.0, 50.0):
        r1, h1 = _dark_decay_rate(kv, kout)
        r2, h2 = _dark_decay_rate(kv, 2 * kout)
        hygiene.merge(h1)
        hygiene.merge(h2)
        rates[kv] = r1
        changes[kv] = abs(r2 - r1) / r1
    seq = [rates[k] for k in sorted(rates)]
    monotonic = all(b > a for a, b in zip(seq, seq[1:])) or all(b < a for a, b in zip(seq, seq[1:]))
    worst_change = max(changes.values())
    photon_rate = _photon_decay_rate(NanocavityParams())
    ratio = photon_rate / rates[25.0]
    info = {
        "rates_meV": {k: round(v, 6) for k, v in rates.items()},
        "kappa_out_doubling_change": {k: round(v, 6) for k, v in changes.items()},
        "dark_to_plasmon_lifetime_ratio": ratio,
    }
    measured = (
        f"max change on doubling kappa_out {worst_change:.2%}; P_A rates "
        + ", ".join(f"{v:.3f}" for v in seq)
        + f" meV for kappa_vib 12.5/25/50 ({'monotonic' if monotonic else 'not monotonic'}); "
        + f"dark/plasmon lifetime ratio {ratio:.2f} (informational)"
    )
    return CheckResult(
        5, "dark-state robustness", worst_change < 0.05 and monotonic, measured,
        "< 5% change, monotonic in kappa_vib", time.perf_counter() - t0, info=info, hygiene=hygiene,
    )


def _ridge_peaks(x: np.ndarray, y: np.ndarray, rel_prominence: float = 1e-3) -> np.ndarray:
    """Peak positions with parabolic refinement on a uniform grid."""
    span = float(np.max(y) - np.min(y))
    if span <= 0:
        return np.array([])
    idx, _ = find_peaks(y, prominence=rel_prominence * span)
    dx = x[1] - x[0]
    out = []
    for i in idx:
        lo, mid, hi = y[i - 1], y[i], y[i + 1]
        denom = lo - 2 * mid + hi
        out.append(x[i] + (0.5 * (lo - hi) / denom * dx if denom != 0 else 0.0))
    return np.array(out)


def check_hybrid_map(hooks: ValidationHooks, workers: int | None = None) -> CheckResult:
    cav = NanocavityParams()
    em = EmitterSpec(omega_qe=cav.omega_cav)
    cfg = _config((em,), initial="ground", drive=DriveBlock(omega_p=cav.omega_cav))
    workers = resolve_workers(workers)
    ax_cav = SweepAxis("delta_cav", -150.0, 150.0, 61)
    ax_p = SweepAxis("delta_p", -150.0, 150.0, 61)
    result, runtime = _timed(lambda: run_map(cfg, ax_cav, ax_p, "re_a", workers=workers))
    signal = -result.grids["re_a"]  # extinction is proportional to -Re<a>
    x = ax_p.values
    centre = int(np.argmin(np.abs(ax_cav.values)))
    peaks = _ridge_peaks(x, signal[centre])
    gaps = {}
    for i, dc in enumerate(ax_cav.values):
        p = _ridge_peaks(x, signal[i])
        if len(p) == 2:
            gaps[float(dc)] = float(p[1] - p[0])
    g = runner.resolve_couplings(cfg)[0]
    width = coherence_decay_rate(em.kappa_vib, cfg.model.dephasing)
    hyb = obs.hybrid_states_for(cav, em, g, emitter_linewidth=width)
    expected = np.array(sorted([hyb.omega_minus.real - em.omega_qe, hyb.omega_plus.real - em.omega_qe]))
    info = {"workers": workers, "failed_cells": result.n_failed, "expected_peaks_meV": expected.tolist(),
            "emitter_linewidth_meV": width}
    if len(peaks) != 2:
        return CheckResult(
            6, "hybrid-state map", False, f"{len(peaks)} ridge maxima at delta_cav = 0 (expected 2)",
            "2% of splitting, < 5 min", runtime, info=info, hygiene=result.hygiene,
        )
    err = float(np.max(np.abs(np.sort(peaks) - expected)) / hyb.splitting)
    min_gap_at = min(gaps, key=gaps.get) if gaps else math.nan
    step = ax_cav.values[1] - ax_cav.values[0]
    crossing = abs(min_gap_at) <= step + 1e-9
    info.update({"measured_peaks_meV": np.sort(peaks).tolist(), "min_gap_delta_cav_meV": min_gap_at})
    passed = err <= 0.02 and crossing and runtime < 300.0 and result.n_failed == 0
    return CheckResult(
        6, "hybrid-state map", passed,
        f"peaks {np.sort(peaks).round(3).tolist()} vs Re w+- {expected.round(3).tolist()} meV, "
        f"error {err:.2%} of splitting {hyb.splitting:.3f} meV; minimum gap at delta_cav = {min_gap_at:g} meV",
        "2% of splitting, < 5 min", runtime, info=info, hygiene=result.hygiene,
    )


def check_splitting_threshold(hooks: ValidationHooks, workers: int | None = None) -> CheckResult:
    cav = NanocavityParams()
    em = EmitterSpec(omega_qe=cav.omega_cav)
    cfg = _config((em,), initial="ground", drive=DriveBlock(omega_p=cav.omega_cav))
    g0 = runner.resolve_couplings(cfg)[0]
    ratios = np.round(np.linspace(0.1, 3.0, 30), 12)
    ax_g = SweepAxis("g_scale", ratios[0] * em.kappa_vib / g0, ratios[-1] * em.kappa_vib / g0, len(ratios))
    ax_p = SweepAxis("delta_p", -200.0, 200.0, 401)
    result, runtime = _timed(lambda: run_map(cfg, ax_g, ax_p, "extinction", workers=workers))
    counts = [len(_ridge_peaks(ax_p.values, row)) for row in result.grids["extinction"]]
    split = [c >= 2 for c in counts]
    mismatches = [float(r) for r, s in zip(ratios, split) if s != (r > 1.0)]
    first_split = next((float(r) for r, s in zip(ratios, split) if s), math.nan)
    info = {"peak_counts": dict(zip(ratios.tolist(), counts)), "failed_cells": result.n_failed}
    return CheckResult(
        7, "splitting threshold", not mismatches and result.n_failed == 0,
        f"two peaks first at g/kappa_vib = {first_split:g}; {len(mismatches)} of {len(ratios)} scan points "
        f"disagree with the g/kappa_vib > 1 rule",
        "two peaks iff g/kappa_vib > 1", runtime, info=info, hygiene=result.hygiene,
    )


def check_n_scaling(hooks: ValidationHooks) -> CheckResult:
    g, kappa = _g0(), C.DEFAULT_KAPPA_OUT
    (est, sim), runtime = _timed(lambda: _rabi_run(8, sector_cap=1))
    expected = math.sqrt(4 * 8 * g**2 - kappa**2)
    err = abs(est.omega - expected) / expected if est.omega is not None else math.inf
    return CheckResult(
        8, "N-emitter scaling", err <= 0.02,
        f"N=8: {est.omega:.4f} vs {expected:.4f} meV (rel. {err:.2e})", "2% relative", runtime,
        hygiene=sim.hygiene,
    )


def check_sector_equivalence(hooks: ValidationHooks) -> CheckResult:
    t0 = time.perf_counter()
    worst = 0.0
    for initial in ("emitter:1", "photon"):
        ems = _colocated(2, C.DEFAULT_KAPPA_VIB)
        ems = (ems[0], replace(ems[1], position=(1.5, 0.0)))
        full = runner.simulate(_config(ems, initial=initial, n_max=2), check_convergence=False)
        cut = runner.simulate(_config(ems, initial=initial, n_max=2, sector_cap=1), check_convergence=False)
        for k, v in full.series.channels.items():
            worst = max(worst, float(np.max(np.abs(v - cut.series[k]))))
    return CheckResult(
        9, "sector-truncation equivalence", worst <= 1e-10,
        f"max channel deviation {worst:.3e}", "1e-10 absolute", time.perf_counter() - t0,
    )


def _expm_crosscheck() -> float:
    cav = NanocavityParams()
    ems = (EmitterSpec(omega_qe=cav.omega_cav), EmitterSpec(omega_qe=cav.omega_cav + 20.0, position=(2.0, 0.0)))
    cfg = _config(ems, initial="photon", t_max=500.0, n_max=2,
                  drive=DriveBlock(omega_p=cav.omega_cav, photon_number=1e-2))
    system = runner.build_system(cfg)
    if system.spec.dim != 12:
        raise AssertionError(f"cross-check system has D={system.spec.dim}, expected 12")
    rho0 = runner.initial_density(cfg, system.spec)
    ts = {}
    for method in ("rk45_adaptive", "expm_propagator"):
        traj = evolve(system.liouvillian, rho0, replace(cfg.evolution, method=method))
        ts[method] = obs.time_series(traj)
    return max(
        float(np.max(np.abs(v - ts["expm_propagator"][k]))) for k, v in ts["rk45_adaptive"].channels.items()
    )


def check_hygiene(hooks: ValidationHooks, collected: runner.Hygiene) -> CheckResult:
    dev, runtime = _timed(_expm_crosscheck)
    tol = HYGIENE_TOL
    ok = collected.ok(tol["trace"], tol["hermiticity"], tol["positivity"]) and dev <= 1e-8
    return CheckResult(
        10, "numerical hygiene", ok,
        f"{collected.n_states} states: trace err {collected.trace_error:.2e}, herm. err "
        f"{collected.hermiticity_error:.2e}, min eig {collected.min_eigenvalue:.2e}; "
        f"adaptive vs expm {dev:.2e}",
        f"trace {tol['trace']:g}, herm. {tol['hermiticity']:g}, min eig >= -{tol['positivity']:g}; 1e-8",
        runtime,
    )


CHECKS = {
    1: check_extinction,
    2: check_driven_steady_state,
    3: check_rabi,
    4: check_dark_state,
    5: check_dark_robustness,
    6: check_hybrid_map,
    7: check_splitting_threshold,
    8: check_n_scaling,
    9: check_sector_equivalence,
}


def run_checks(selected=None, hooks: ValidationHooks | None = None, workers: int | None = None,
               report=None) -> list[CheckResult]:
    """Run the selected checks (default: all ten), calling ``report`` on each result."""
    hooks = hooks or ValidationHooks()
    selected = sorted(set(selected or list(CHECKS) + [10]))
    # hygiene aggregates the snapshots of checks 3 to 8
    needed = set(selected) | ({3, 4, 5, 6, 7, 8} if 10 in selected else set())
    results = {}
    for number in sorted(needed - {10}):
        fn = CHECKS[number]
        kwargs = {"workers": workers} if number in (6, 7) else {}
        try:
            res = fn(hooks, **kwargs)
        except Exception as exc:
            res = CheckResult(number, fn.__name__.removeprefix("check_"), False, f"error: {exc}", "-", 0.0)
        results[number] = res
        if report and number in selected:
            report(res)
    if 10 in selected:
        collected = runner.Hygiene()
        missing = []
        for n in range(3, 9):
            if results[n].hygiene is None:
                missing.append(n)
            else:
                collected.merge(results[n].hygiene)
        res = check_hygiene(hooks, collected)
        if missing:
            res.passed = False
            res.measured += f"; no snapshots from checks {missing}"
        results[10] = res
        if report:
            report(res)
    return [results[n] for n in selected]
