"""Result bundles and their CSV serialization.

Every table starts with ``# key=value`` header lines (config echo, derived
quantities, metadata), then a column-name line, then one row per record.
Numbers are written with ``%.17e`` so that values round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from plasmon_cqed import __version__
from plasmon_cqed.config import RunConfig, config_from_items, config_items
from plasmon_cqed.observables import TimeSeries
from plasmon_cqed.sweep import SweepResult

FILES = ("timeseries.csv", "sweep.csv", "summary.csv")


def format_number(x: float) -> str:
    return "%.17e" % x


@dataclass
class ResultBundle:
    config: RunConfig
    command: str
    derived: dict[str, float]
    series: TimeSeries | None = None
    sweep: SweepResult | None = None
    summary: dict[str, float] = field(default_factory=dict)
    notes: dict[str, str] = field(default_factory=dict)

    def header(self) -> list[tuple[str, str]]:
        items = [("command", self.command), ("code_version", __version__)]
        items += [(f"config.{s}.{k}", v) for s, k, v in config_items(self.config)]
        items += [(f"derived.{k}", format_number(v)) for k, v in self.derived.items()]
        items += [(f"note.{k}", v) for k, v in self.notes.items()]
        return items


def write_table(path, header: list[tuple[str, str]], columns: dict[str, object]) -> None:
    names = list(columns)
    data = [np.asarray(columns[k]) for k in names]
    n = len(data[0]) if data else 0
    if any(len(col) != n for col in data):
        raise ValueError("all columns must have the same length")
    lines = [f"# {k}={v}" for k, v in header]
    lines.append(",".join(names))
    for i in range(n):
        cells = []
        for col in data:
            v = col[i]
            cells.append(str(v) if isinstance(v, str) else format_number(float(v)))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    """Inverse of ``write_table``; non-numeric columns come back as string arrays."""
    header: dict[str, str] = {}
    rows: list[list[str]] = []
    names: list[str] | None = None
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            header[key] = value
        elif names is None:
            names = line.split(",")
        elif line:
            rows.append(line.split(","))
    if names is None:
        raise ValueError(f"{path}: no column header line")
    columns: dict[str, np.ndarray] = {}
    for j, name in enumerate(names):
        raw = [r[j] for r in rows]
        try:
            columns[name] = np.array([float(x) for x in raw])
        except ValueError:
            columns[name] = np.array(raw, dtype=object)
    return header, columns


def config_from_header(header: dict[str, str], base_dir=None) -> RunConfig:
    """Rebuild the run configuration echoed in a table header."""
    items = []
    for key, value in header.items():
        if key.startswith("config."):
            section, _, name = key[len("config."):].rpartition(".")
            items.append((section, name, value))
    return config_from_items(items, base_dir=base_dir)


def derived_from_header(header: dict[str, str]) -> dict[str, float]:
    return {k[len("derived."):]: float(v) for k, v in header.items() if k.startswith("derived.")}


def _sweep_columns(result: SweepResult) -> dict[str, object]:
    grids = np.meshgrid(*[a.values for a in result.axes], indexing="ij")
    cols: dict[str, object] = {a.name: g.ravel() for a, g in zip(result.axes, grids)}
    for k, g in result.grids.items():
        cols[k] = g.ravel()
    cols["status"] = [str(s) for s in result.status.ravel()]
    return cols


def serialize(bundle: ResultBundle, out_dir) -> list[Path]:
    """Write the bundle's tables into ``out_dir`` and return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = bundle.header()
    written = []
    if bundle.series is not None:
        cols = {"time_fs": bundle.series.times, **bundle.series.channels}
        path = out / "timeseries.csv"
        write_table(path, header, cols)
        written.append(path)
    if bundle.sweep is not None:
        sweep_header = header + [(f"sweep.axis{i}", str(a)) for i, a in enumerate(bundle.sweep.axes, start=1)]
        sweep_header += [("sweep.observable", bundle.sweep.observable), ("sweep.failed_cells", str(bundle.sweep.n_failed))]
        for k in ("placement", "n_emitters"):
            if k in bundle.sweep.metadata:
                sweep_header.append((f"sweep.{k}", bundle.sweep.metadata[k]))
        path = out / "sweep.csv"
        write_table(path, sweep_header, _sweep_columns(bundle.sweep))
        written.append(path)
    summary = {k: [v] for k, v in bundle.summary.items()}
    path = out / "summary.csv"
    write_table(path, header, summary)
    written.append(path)
    return written
