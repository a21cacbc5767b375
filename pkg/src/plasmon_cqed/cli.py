"""Command-line entry point.

    plasmon-cqed simulate|steady|sweep|hybrid|validate --config PATH --out DIR [--workers N] [--seed-free]

Exit codes: 0 success, 1 configuration error, 2 solver or I/O failure,
3 validation failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from plasmon_cqed import __version__
from plasmon_cqed import observables as obs
from plasmon_cqed import runner
from plasmon_cqed.config import ConfigError, RunConfig, parse_config
from plasmon_cqed.lindblad import IntegrationError, SolverError, coherence_decay_rate
from plasmon_cqed.results import ResultBundle, serialize
from plasmon_cqed.sweep import SweepAxis, run_map, run_position_sweep

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VALIDATION = 0, 1, 2, 3

log = logging.getLogger("plasmon_cqed")


def _notes(convergence: dict) -> dict[str, str]:
    return {"convergence_check": str(convergence.get("status", "n/a"))}


def cmd_simulate(config: RunConfig, args) -> ResultBundle:
    sim = runner.simulate(config)
    series = sim.series
    summary = {f"final_{k}": float(v[-1]) for k, v in series.channels.items()}
    notes = _notes(sim.convergence)
    if "photon_number" in series.channels:
        est = obs.rabi_frequency(series.times, series["photon_number"])
        summary["rabi_frequency"] = est.omega if est.omega is not None else math.nan
        notes["rabi_status"] = est.status
    summary["convergence_drift"] = float(sim.convergence.get("drift", math.nan))
    summary["trace_error"] = sim.hygiene.trace_error
    summary["min_eigenvalue"] = sim.hygiene.min_eigenvalue
    if sim.trajectory.warnings:
        notes["warnings"] = str(len(sim.trajectory.warnings))
    return ResultBundle(config, "simulate", runner.derived_quantities(config), series=series,
                        summary=summary, notes=notes)


def cmd_steady(config: RunConfig, args) -> ResultBundle:
    res = runner.steady(config)
    summary = dict(res.values)
    summary["convergence_drift"] = float(res.convergence.get("drift", math.nan))
    summary["trace_error"] = res.hygiene.trace_error
    summary["min_eigenvalue"] = res.hygiene.min_eigenvalue
    return ResultBundle(config, "steady", runner.derived_quantities(config), summary=summary,
                        notes=_notes(res.convergence))


def cmd_sweep(config: RunConfig, args) -> ResultBundle:
    if config.sweep is None:
        raise ConfigError("the sweep command needs a [sweep] block", config.source)
    s = config.sweep
    axis1 = SweepAxis.parse(s.axis1)
    if s.kind == "map":
        result = run_map(config, axis1, SweepAxis.parse(s.axis2), s.observable, workers=args.workers)
    else:
        result = run_position_sweep(config, s.placement, axis1, s.n_emitters, workers=args.workers)
    summary = {
        "cells": float(result.status.size),
        "failed_cells": float(result.n_failed),
        "trace_error": result.hygiene.trace_error,
        "min_eigenvalue": result.hygiene.min_eigenvalue,
    }
    return ResultBundle(config, "sweep", runner.derived_quantities(config), sweep=result, summary=summary)


def cmd_hybrid(config: RunConfig, args) -> ResultBundle:
    if not config.emitters:
        raise ConfigError("the hybrid command needs at least one emitter", config.source)
    em = config.emitters[0]
    g = runner.resolve_couplings(config)[0]
    width = coherence_decay_rate(em.kappa_vib, config.model.dephasing)
    hyb = obs.hybrid_states_for(config.cavity, em, g, emitter_linewidth=width)
    summary = {
        "g": g,
        "emitter_linewidth": width,
        "omega_plus_re": hyb.omega_plus.real,
        "omega_plus_im": hyb.omega_plus.imag,
        "omega_minus_re": hyb.omega_minus.real,
        "omega_minus_im": hyb.omega_minus.imag,
        "splitting": hyb.splitting,
    }
    return ResultBundle(config, "hybrid", runner.derived_quantities(config), summary=summary)


def cmd_validate(args) -> int:
    from plasmon_cqed.validation import run_checks

    lines = []

    def report(res):
        lines.append(res.line())
        print(res.line(), flush=True)

    results = run_checks(workers=args.workers, report=report)
    n_pass = sum(r.passed for r in results)
    footer = f"{n_pass} of {len(results)} checks passed"
    print(footer)
    for r in results:
        for k, v in r.info.items():
            if k == "dark_to_plasmon_lifetime_ratio":
                print(f"info: dark-state to plasmon lifetime ratio {v:.3f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "validation.txt").write_text("\n".join(lines + [footer]) + "\n")
    return EXIT_OK if n_pass == len(results) else EXIT_VALIDATION


COMMANDS = {"simulate": cmd_simulate, "steady": cmd_steady, "sweep": cmd_sweep, "hybrid": cmd_hybrid}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plasmon-cqed", description="Quantum emitters in a lossy plasmonic nanocavity.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "steady", "sweep", "hybrid", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=name != "validate", help="INI run configuration")
        p.add_argument("--out", type=Path, required=name in ("simulate", "steady", "sweep"), help="output directory")
        p.add_argument("--workers", type=int, default=None, help="sweep worker processes (env PLASMON_CQED_WORKERS)")
        p.add_argument("--seed-free", action="store_true", help="accepted for compatibility; runs are deterministic")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _print_summary(bundle: ResultBundle) -> None:
    for k, v in bundle.derived.items():
        print(f"{k} = {v:.10g}")
    for k, v in bundle.summary.items():
        print(f"{k} = {np.format_float_scientific(v, precision=10) if np.isfinite(v) else v}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        return cmd_validate(args)
    try:
        config = parse_config(args.config)
        bundle = COMMANDS[args.command](config, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, IntegrationError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _print_summary(bundle)
    if args.out is not None:
        try:
            for path in serialize(bundle, args.out):
                print(f"wrote {path}")
        except OSError as exc:
            print(f"I/O failure: {exc}", file=sys.stderr)
            return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
