"""INI-style run configuration: strict parsing, defaults and round-trip serialization.

Sections: ``[model]``, ``[nanocavity]`` (required), ``[profile]``,
``[emitter.1]`` ... ``[emitter.N]``, ``[drive]``, ``[initial]``,
``[evolution]`` and ``[sweep]``. Energies are meV, times fs, lengths nm.
"""

from __future__ import annotations

import configparser
import difflib
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from plasmon_cqed import constants as C
from plasmon_cqed.cavity import EmitterSpec, ModeProfile, NanocavityParams, load_mode_profile
from plasmon_cqed.lindblad import DEPHASING, EvolutionConfig


class ConfigError(ValueError):
    def __init__(self, message: str, path=None, line: int | None = None, column: int | None = None):
        self.path, self.line, self.column = path, line, column
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:{column or 1}:"
        super().__init__(f"{where} {message}".strip())


@dataclass(frozen=True)
class ModelBlock:
    n_max: int = 2
    sector_cap: int | None = None
    dephasing: str = "literal"
    g0: float | None = None
    g_scale: float = 1.0
    convergence_check: bool = True


@dataclass(frozen=True)
class DriveBlock:
    omega_p: float
    alpha: float | None = None
    photon_number: float = C.DEFAULT_PHOTON_NUMBER


@dataclass(frozen=True)
class InitialBlock:
    state: str = "ground"
    amplitudes: tuple[complex, ...] = ()


@dataclass(frozen=True)
class SweepBlock:
    kind: str = "map"
    axis1: str = "delta_cav:-150:150:61"
    axis2: str | None = "delta_p:-150:150:61"
    observable: str = "re_a"
    placement: str | None = None
    n_emitters: int | None = None
    budget: int = 100_000


@dataclass(frozen=True)
class RunConfig:
    cavity: NanocavityParams
    emitters: tuple[EmitterSpec, ...]
    profile: ModeProfile
    model: ModelBlock = ModelBlock()
    drive: DriveBlock | None = None
    initial: InitialBlock = InitialBlock()
    evolution: EvolutionConfig = EvolutionConfig(t_max=500.0)
    sweep: SweepBlock | None = None
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        excited = self.initial.state != "ground"
        if self.drive is None and not excited:
            raise ConfigError("config has neither a [drive] block nor an initial excitation; nothing would happen")


_KEYS = {
    "model": ["n_max", "sector_cap", "dephasing", "g0", "g_scale", "convergence_check"],
    "nanocavity": ["omega_cav", "kappa_out", "mode_volume_re", "mode_volume_im", "epsilon", "sigma_ext_classical"],
    "profile": ["kind", "width", "file"],
    "emitter": ["omega_qe", "kappa_vib", "dipole", "x", "y"],
    "drive": ["omega_p", "alpha", "photon_number"],
    "initial": ["state", "amplitudes"],
    "evolution": ["t_max", "dt_initial", "method", "rel_tol", "abs_tol", "record_stride"],
    "sweep": ["kind", "axis1", "axis2", "observable", "placement", "n_emitters", "budget"],
}
_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^(\s*)([^=:#;\s][^=:]*?)\s*[=:]")
_NONE = {"", "none", "auto"}


def _nearest(word, options):
    match = difflib.get_close_matches(word, options, n=1, cutoff=0.5)
    return f"; did you mean {match[0]!r}?" if match else f"; valid keys: {', '.join(options)}"


class _Reader:
    def __init__(self, text: str, path=None):
        self.path = path
        self.parser = configparser.ConfigParser(
            interpolation=None, inline_comment_prefixes=("#", ";"), strict=True, empty_lines_in_values=False
        )
        self.parser.optionxform = str
        try:
            self.parser.read_string(text, source=str(path or "<config>"))
        except configparser.DuplicateSectionError as exc:
            raise ConfigError(f"duplicate section [{exc.section}]", path, exc.lineno) from None
        except configparser.DuplicateOptionError as exc:
            raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", path, exc.lineno) from None
        except configparser.MissingSectionHeaderError as exc:
            raise ConfigError("content before the first [section] header", path, exc.lineno) from None
        except configparser.ParsingError as exc:
            lineno = exc.errors[0][0] if exc.errors else None
            raise ConfigError("malformed line (expected 'key = value')", path, lineno) from None
        self.locations = self._locate(text)

    @staticmethod
    def _locate(text):
        where, section = {}, None
        for lineno, line in enumerate(text.splitlines(), start=1):
            m = _SECTION_RE.match(line)
            if m:
                section = m.group(1).strip()
                where[(section, None)] = (lineno, line.index("[") + 1)
                continue
            m = _KEY_RE.match(line)
            if m and section is not None:
                where[(section, m.group(2).strip())] = (lineno, len(m.group(1)) + 1)
        return where

    def error(self, message, section, key=None):
        line, col = self.locations.get((section, key), self.locations.get((section, None), (None, None)))
        return ConfigError(message, self.path, line, col)

    def section(self, name, kind):
        if not self.parser.has_section(name):
            return None
        values = dict(self.parser.items(name))
        valid = _KEYS[kind]
        for key in values:
            if key not in valid:
                raise self.error(f"unknown key {key!r} in [{name}]{_nearest(key, valid)}", name, key)
        return _Section(self, name, values)


class _Section:
    def __init__(self, reader, name, values):
        self.reader, self.name, self.values = reader, name, values

    def _convert(self, key, conv, default, what):
        raw = self.values.get(key)
        if raw is None:
            return default
        raw = raw.strip()
        try:
            return conv(raw)
        except (ValueError, TypeError):
            raise self.reader.error(f"[{self.name}] {key} = {raw!r} is not {what}", self.name, key) from None

    def float(self, key, default=None, optional=False):
        def conv(raw):
            if optional and raw.lower() in _NONE:
                return None
            return float(raw)

        return self._convert(key, conv, default, "a number")

    def int(self, key, default=None, optional=False):
        def conv(raw):
            if optional and raw.lower() in _NONE:
                return None
            return int(raw)

        return self._convert(key, conv, default, "an integer")

    def str(self, key, default=None, choices=None, optional=False):
        value = self._convert(key, str, default, "a string")
        if optional and isinstance(value, str) and value.lower() in _NONE:
            value = None
        if choices is not None and value is not None and value not in choices:
            raise self.reader.error(
                f"[{self.name}] {key} = {value!r} is not one of {', '.join(choices)}", self.name, key
            )
        return value

    def bool(self, key, default):
        def conv(raw):
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)

        return self._convert(key, conv, default, "a boolean")

    def build(self, cls, **kwargs):
        try:
            return cls(**kwargs)
        except ValueError as exc:
            raise self.reader.error(f"[{self.name}] {exc}", self.name) from None


def _parse_amplitudes(raw):
    return tuple(complex(part.strip().replace(" ", "")) for part in raw.split(",") if part.strip())


def parse_config_text(text: str, path=None, base_dir: Path | None = None) -> RunConfig:
    reader = _Reader(text, path)
    known = set(_KEYS) - {"emitter"}
    emitter_sections = []
    for name in reader.parser.sections():
        m = re.fullmatch(r"emitter\.(\d+)", name)
        if m:
            emitter_sections.append((int(m.group(1)), name))
        elif name not in known:
            options = sorted(known) + ["emitter.1"]
            raise reader.error(f"unknown section [{name}]{_nearest(name, options)}", name)

    model_s = reader.section("model", "model")
    model = ModelBlock()
    if model_s:
        model = model_s.build(
            ModelBlock,
            n_max=model_s.int("n_max", 2),
            sector_cap=model_s.int("sector_cap", None, optional=True),
            dephasing=model_s.str("dephasing", "literal", choices=sorted(DEPHASING)),
            g0=model_s.float("g0", None, optional=True),
            g_scale=model_s.float("g_scale", 1.0),
            convergence_check=model_s.bool("convergence_check", True),
        )
        if model.n_max < 1:
            raise reader.error("[model] n_max must be >= 1", "model", "n_max")
        if model.sector_cap is not None and model.sector_cap < 0:
            raise reader.error("[model] sector_cap must be >= 0", "model", "sector_cap")
        if model.g0 is not None and model.g0 < 0:
            raise reader.error("[model] g0 must be >= 0", "model", "g0")
        if model.g_scale < 0:
            raise reader.error("[model] g_scale must be >= 0", "model", "g_scale")

    cav_s = reader.section("nanocavity", "nanocavity")
    if cav_s is None:
        raise ConfigError("missing required block [nanocavity]", path)
    d = NanocavityParams()
    cavity = cav_s.build(
        NanocavityParams,
        **{f.name: cav_s.float(f.name, getattr(d, f.name)) for f in fields(NanocavityParams)},
    )

    prof_s = reader.section("profile", "profile")
    profile = ModeProfile()
    if prof_s:
        kind = prof_s.str("kind", "analytic", choices=["analytic", "tabulated"])
        if kind == "tabulated":
            file = prof_s.str("file")
            if file is None:
                raise reader.error("[profile] kind = tabulated needs a 'file' key", "profile")
            fpath = Path(file)
            if not fpath.is_absolute() and base_dir is not None:
                fpath = base_dir / fpath
            if not fpath.exists():
                raise reader.error(f"[profile] file {file!r} does not exist", "profile", "file")
            try:
                profile = load_mode_profile(fpath)
            except ValueError as exc:
                raise reader.error(f"[profile] {exc}", "profile", "file") from None
            profile = replace(profile, source=file)
        else:
            profile = prof_s.build(ModeProfile, kind="analytic", width=prof_s.float("width", None, optional=True))

    emitter_sections.sort()
    numbers = [n for n, _ in emitter_sections]
    if numbers != list(range(1, len(numbers) + 1)):
        raise ConfigError(f"emitter sections must be numbered 1..N without gaps, got {numbers}", path)
    emitters = []
    for _, name in emitter_sections:
        s = reader.section(name, "emitter")
        emitters.append(
            s.build(
                EmitterSpec,
                omega_qe=s.float("omega_qe", cavity.omega_cav),
                kappa_vib=s.float("kappa_vib", C.DEFAULT_KAPPA_VIB),
                dipole=s.float("dipole", C.DEFAULT_DIPOLE_DEBYE),
                position=(s.float("x", 0.0), s.float("y", 0.0)),
            )
        )
        if profile.kind == "tabulated" and emitters[-1].radius > profile.r_max:
            raise reader.error(f"[{name}] position lies outside the tabulated profile", name)

    drive_s = reader.section("drive", "drive")
    drive = None
    if drive_s:
        drive = DriveBlock(
            omega_p=drive_s.float("omega_p", cavity.omega_cav),
            alpha=drive_s.float("alpha", None, optional=True),
            photon_number=drive_s.float("photon_number", C.DEFAULT_PHOTON_NUMBER),
        )
        if drive.alpha is not None and drive.alpha < 0:
            raise reader.error("[drive] alpha must be >= 0", "drive", "alpha")
        if drive.photon_number < 0:
            raise reader.error("[drive] photon_number must be >= 0", "drive", "photon_number")

    init_s = reader.section("initial", "initial")
    initial = InitialBlock()
    if init_s:
        state = init_s.str("state", "ground")
        amps = init_s._convert("amplitudes", _parse_amplitudes, (), "a comma-separated list of complex numbers")
        m = re.fullmatch(r"emitter:(\d+)", state)
        if state not in ("ground", "photon", "custom") and not m:
            raise reader.error(
                f"[initial] state = {state!r} is not one of ground, photon, emitter:j, custom", "initial", "state"
            )
        if m and not 1 <= int(m.group(1)) <= len(emitters):
            raise reader.error(f"[initial] {state} refers to a missing emitter", "initial", "state")
        if state == "custom":
            if len(amps) != len(emitters) + 2:
                raise reader.error(
                    f"[initial] custom state needs {len(emitters) + 2} amplitudes (ground, photon, emitters)",
                    "initial",
                    "amplitudes",
                )
            if not any(amps[1:]):
                raise reader.error("[initial] custom state carries no excitation", "initial", "amplitudes")
        elif amps:
            raise reader.error("[initial] amplitudes only apply to state = custom", "initial", "amplitudes")
        initial = InitialBlock(state, amps)

    evo_s = reader.section("evolution", "evolution")
    evolution = EvolutionConfig(t_max=500.0)
    if evo_s:
        evolution = evo_s.build(
            EvolutionConfig,
            t_max=evo_s.float("t_max", 500.0),
            dt_initial=evo_s.float("dt_initial", evolution.dt_initial),
            method=evo_s.str("method", evolution.method),
            rel_tol=evo_s.float("rel_tol", evolution.rel_tol),
            abs_tol=evo_s.float("abs_tol", evolution.abs_tol),
            record_stride=evo_s.int("record_stride", evolution.record_stride),
        )

    sweep_s = reader.section("sweep", "sweep")
    sweep = None
    if sweep_s:
        from plasmon_cqed.sweep import SweepAxis

        kind = sweep_s.str("kind", "map", choices=["map", "position"])
        default_axis2 = SweepBlock.axis2 if kind == "map" else None
        sweep = SweepBlock(
            kind=kind,
            axis1=sweep_s.str("axis1", SweepBlock.axis1),
            axis2=sweep_s.str("axis2", default_axis2, optional=True),
            observable=sweep_s.str("observable", "re_a"),
            placement=sweep_s.str("placement", None, optional=True),
            n_emitters=sweep_s.int("n_emitters", None, optional=True),
            budget=sweep_s.int("budget", 100_000),
        )
        for key in ("axis1", "axis2"):
            spec = getattr(sweep, key)
            if spec is None:
                if key == "axis2" and kind == "map":
                    raise reader.error("[sweep] a map needs axis2", "sweep", key)
                continue
            try:
                SweepAxis.parse(spec)
            except ValueError as exc:
                raise reader.error(f"[sweep] {key}: {exc}", "sweep", key) from None
        if kind == "position" and sweep.placement is None:
            raise reader.error("[sweep] kind = position needs a placement", "sweep")

    try:
        return RunConfig(
            cavity=cavity,
            emitters=tuple(emitters),
            profile=profile,
            model=model,
            drive=drive,
            initial=initial,
            evolution=evolution,
            sweep=sweep,
            source=str(path) if path else None,
        )
    except ConfigError as exc:
        raise ConfigError(str(exc), path) from None


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from None
    return parse_config_text(text, path, base_dir=path.parent)


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, complex):
        return repr(value).strip("()")
    return repr(value) if isinstance(value, float) else str(value)


def config_items(config: RunConfig) -> list[tuple[str, str, str]]:
    """(section, key, value) triples with every default resolved."""
    out = []
    m = config.model
    for key in _KEYS["model"]:
        out.append(("model", key, _fmt(getattr(m, key))))
    for f in fields(NanocavityParams):
        out.append(("nanocavity", f.name, _fmt(getattr(config.cavity, f.name))))
    if config.profile.kind == "analytic":
        out += [("profile", "kind", "analytic"), ("profile", "width", _fmt(config.profile.width))]
    else:
        out += [("profile", "kind", "tabulated"), ("profile", "file", str(config.profile.source))]
    for j, em in enumerate(config.emitters, start=1):
        name = f"emitter.{j}"
        out += [
            (name, "omega_qe", _fmt(em.omega_qe)),
            (name, "kappa_vib", _fmt(em.kappa_vib)),
            (name, "dipole", _fmt(em.dipole)),
            (name, "x", _fmt(em.position[0])),
            (name, "y", _fmt(em.position[1])),
        ]
    if config.drive is not None:
        for key in _KEYS["drive"]:
            out.append(("drive", key, _fmt(getattr(config.drive, key))))
    out.append(("initial", "state", config.initial.state))
    if config.initial.amplitudes:
        out.append(("initial", "amplitudes", ", ".join(_fmt(complex(a)) for a in config.initial.amplitudes)))
    for key in _KEYS["evolution"]:
        out.append(("evolution", key, _fmt(getattr(config.evolution, key))))
    if config.sweep is not None:
        for key in _KEYS["sweep"]:
            out.append(("sweep", key, _fmt(getattr(config.sweep, key))))
    return out


def serialize_config(config: RunConfig) -> str:
    lines, current = [], None
    for section, key, value in config_items(config):
        if section != current:
            if current is not None:
                lines.append("")
            lines.append(f"[{section}]")
            current = section
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def config_from_items(items, base_dir=None) -> RunConfig:
    """Rebuild a config from (section, key, value) triples, e.g. an echoed CSV header."""
    sections: dict[str, list[str]] = {}
    for section, key, value in items:
        sections.setdefault(section, []).append(f"{key} = {value}")
    text = "\n\n".join(f"[{s}]\n" + "\n".join(body) for s, body in sections.items()) + "\n"
    return parse_config_text(text, base_dir=base_dir)
