"""Parallel parameter maps and emitter-position sweeps.

Each grid cell is an independent solve described by an immutable job. Jobs run
in a process pool and results are assembled by cell index, so the output does
not depend on worker count or completion order.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from plasmon_cqed import __version__
from plasmon_cqed import observables as obs
from plasmon_cqed import runner
from plasmon_cqed.cavity import effective_coupling, place_emitters
from plasmon_cqed.config import RunConfig, config_items

log = logging.getLogger(__name__)

AXIS_UNITS = {"delta_p": "meV", "delta_cav": "meV", "g_scale": "1", "position_x": "nm", "ring_radius": "nm"}
DEFAULT_BUDGET = 100_000
WORKERS_ENV = "PLASMON_CQED_WORKERS"


@dataclass(frozen=True)
class SweepAxis:
    name: str
    start: float
    stop: float
    count: int

    def __post_init__(self):
        if self.name not in AXIS_UNITS:
            raise ValueError(f"unknown sweep axis {self.name!r}; expected one of {sorted(AXIS_UNITS)}")
        if self.count < 2:
            raise ValueError(f"axis {self.name} needs count >= 2, got {self.count}")
        if not self.start < self.stop:
            raise ValueError(f"axis {self.name} needs start < stop, got {self.start} >= {self.stop}")
        if self.name in ("g_scale", "ring_radius") and self.start < 0:
            raise ValueError(f"axis {self.name} must be non-negative")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)

    @classmethod
    def parse(cls, text: str) -> "SweepAxis":
        """``name:start:stop:count``."""
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError(f"axis {text!r} is not of the form name:start:stop:count")
        try:
            return cls(parts[0].strip(), float(parts[1]), float(parts[2]), int(parts[3]))
        except ValueError as exc:
            if "could not convert" in str(exc) or "invalid literal" in str(exc):
                raise ValueError(f"axis {text!r} has a non-numeric bound or count") from None
            raise

    def __str__(self) -> str:
        return f"{self.name}:{self.start!r}:{self.stop!r}:{self.count}"


@dataclass
class SweepResult:
    """Scalar grids over the outer product of the axes.

    Failed cells hold NaN in every grid and a ``failed: ...`` marker in
    ``status``; successful cells are marked ``ok``.
    """

    axes: tuple[SweepAxis, ...]
    grids: dict[str, np.ndarray]
    status: np.ndarray
    observable: str
    hygiene: runner.Hygiene = field(default_factory=runner.Hygiene)
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.count for a in self.axes)

    @property
    def grid(self) -> np.ndarray:
        return self.grids[self.observable]

    @property
    def n_failed(self) -> int:
        return int(np.sum(self.status != "ok"))


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise ValueError(f"{WORKERS_ENV}={env!r} is not an integer") from None
        else:
            workers = min(os.cpu_count() or 1, 8)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers


def _parallel_map(fn, jobs: list, workers: int) -> list:
    if workers == 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    chunk = max(1, len(jobs) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=chunk))


def _reference_frequency(config: RunConfig) -> float:
    return config.emitters[0].omega_qe if config.emitters else config.cavity.omega_cav


def apply_axis(config: RunConfig, name: str, value: float, reference: float) -> RunConfig:
    """Config at one axis value. Detunings are measured from ``reference``."""
    if name == "delta_p":
        if config.drive is None:
            raise ValueError("a delta_p axis needs a [drive] block")
        return replace(config, drive=replace(config.drive, omega_p=reference + value))
    if name == "delta_cav":
        return replace(config, cavity=replace(config.cavity, omega_cav=reference + value))
    if name == "g_scale":
        return replace(config, model=replace(config.model, g_scale=value))
    sweep = config.sweep
    placement = sweep.placement if sweep is not None else None
    n = (sweep.n_emitters if sweep is not None else None) or len(config.emitters)
    template = runner.emitter_template(config)
    if name == "position_x":
        if placement is None:
            if not config.emitters:
                raise ValueError("a position_x axis needs at least one emitter")
            first = replace(config.emitters[0], position=(value, config.emitters[0].position[1]))
            return replace(config, emitters=(first,) + config.emitters[1:])
        return replace(config, emitters=tuple(place_emitters(placement, n, value, **template)))
    if name == "ring_radius":
        placement = placement or "ring"
        if placement not in ("ring", "encircled"):
            raise ValueError(f"a ring_radius axis needs a ring or encircled placement, got {placement!r}")
        return replace(config, emitters=tuple(place_emitters(placement, n, value, **template)))
    raise ValueError(f"unknown sweep axis {name!r}")


def _metadata(config: RunConfig, axes) -> dict[str, str]:
    meta = {f"config.{s}.{k}": v for s, k, v in config_items(config)}
    meta["code_version"] = __version__
    for i, ax in enumerate(axes, start=1):
        meta[f"axis{i}"] = str(ax)
    return meta


def _failure(exc: Exception) -> str:
    text = " ".join(f"{type(exc).__name__}: {exc}".split())
    return "failed: " + text.replace(",", ";")


def _map_cell(job):
    config, assignments, reference, coupling_cavity = job
    try:
        for name, value in assignments:
            config = apply_axis(config, name, value, reference)
        res = runner.steady(config, check_convergence=False, coupling_cavity=coupling_cavity)
        values = res.values
        if not all(math.isfinite(v) for v in values.values()):
            raise FloatingPointError("non-finite observable")
        return "ok", values, res.hygiene
    except Exception as exc:  # recorded in-cell, the sweep continues
        return _failure(exc), {}, runner.Hygiene()


def _assemble(axes, observable, outcomes, metadata) -> SweepResult:
    shape = tuple(a.count for a in axes)
    names: list[str] = []
    for _, values, _ in outcomes:
        for k in values:
            if k not in names:
                names.append(k)
    grids = {k: np.full(len(outcomes), np.nan) for k in names}
    status = np.empty(len(outcomes), dtype=object)
    hygiene = runner.Hygiene()
    for i, (st, values, hyg) in enumerate(outcomes):
        status[i] = st
        for k, v in values.items():
            grids[k][i] = v
        hygiene.merge(hyg)
    if observable not in grids:
        if all(st != "ok" for st in status):
            grids[observable] = np.full(len(outcomes), np.nan)
        else:
            raise ValueError(f"observable {observable!r} not available; choose from {sorted(grids)}")
    grids = {k: g.reshape(shape) for k, g in grids.items()}
    result = SweepResult(tuple(axes), grids, status.reshape(shape), observable, hygiene, metadata)
    if result.n_failed:
        log.warning("%d of %d sweep cells failed", result.n_failed, len(outcomes))
    return result


def _check_budget(n_cells: int, budget: int) -> None:
    if n_cells > budget:
        raise ValueError(f"sweep of {n_cells} cells exceeds the budget of {budget}; refusing to subsample")


def run_map(config: RunConfig, axis1: SweepAxis, axis2: SweepAxis, observable: str = "re_a",
            workers: int | None = None, budget: int | None = None) -> SweepResult:
    """Steady-state observables on the ``axis1 x axis2`` grid (axis1 varies slowest).

    Detuning axes are measured from emitter 1's transition. Couplings keep the
    field prefactor of the unswept cavity so that g stays fixed along the map.
    """
    if axis1.name == axis2.name:
        raise ValueError("map axes must differ")
    if budget is None:
        budget = config.sweep.budget if config.sweep is not None else DEFAULT_BUDGET
    _check_budget(axis1.count * axis2.count, budget)
    workers = resolve_workers(workers)
    reference = _reference_frequency(config)
    jobs = [
        (config, ((axis1.name, float(v1)), (axis2.name, float(v2))), reference, config.cavity)
        for v1 in axis1.values
        for v2 in axis2.values
    ]
    outcomes = _parallel_map(_map_cell, jobs, workers)
    return _assemble((axis1, axis2), observable, outcomes, _metadata(config, (axis1, axis2)))


def _position_cell(job):
    config, placement, n, distance = job
    try:
        template = runner.emitter_template(config)
        emitters = tuple(place_emitters(placement, n, distance, **template))
        config = replace(config, emitters=emitters)
        sim = runner.simulate(config, check_convergence=False)
        series = sim.series
        est = obs.rabi_frequency(series.times, series["photon_number"])
        values = {
            "effective_coupling": effective_coupling(emitters, config.profile),
            "rabi_frequency": est.omega if est.omega is not None else math.nan,
            "final_photon_number": float(series["photon_number"][-1]),
        }
        if n == 2:
            values["final_P_A"] = float(series["P_A"][-1])
        elif n > 2:
            values["final_P_dark"] = float(series["P_dark"][-1])
        status = "ok" if est.omega is not None else "ok (overdamped)"
        return status, values, sim.hygiene
    except Exception as exc:
        return _failure(exc), {}, runner.Hygiene()


def run_position_sweep(config: RunConfig, placement: str, axis: SweepAxis, n_emitters: int | None = None,
                       workers: int | None = None, budget: int | None = None) -> SweepResult:
    """Time evolution at each emitter distance with summary channels.

    Emitters copy emitter 1's transition, linewidth and dipole. A Rabi
    frequency is NaN when the photon number does not oscillate.
    """
    if axis.name not in ("position_x", "ring_radius"):
        raise ValueError(f"a position sweep needs a position_x or ring_radius axis, got {axis.name!r}")
    n = n_emitters or (config.sweep.n_emitters if config.sweep is not None else None) or len(config.emitters)
    # validate the placement once up front
    place_emitters(placement, n, float(axis.values[0]))
    if budget is None:
        budget = config.sweep.budget if config.sweep is not None else DEFAULT_BUDGET
    _check_budget(axis.count, budget)
    jobs = [(config, placement, n, float(v)) for v in axis.values]
    outcomes = _parallel_map(_position_cell, jobs, resolve_workers(workers))
    # an overdamped cell is a valid outcome, not a failure
    outcomes = [("ok" if st.startswith("ok") else st, v, h) for st, v, h in outcomes]
    meta = _metadata(config, (axis,))
    meta["placement"] = placement
    meta["n_emitters"] = str(n)
    result = _assemble((axis,), "effective_coupling", outcomes, meta)
    return result
