"""INI-style run configuration with [model], [penalties], [sim] and [schedule] sections.

``p0``/``p1`` in [model] are expanded into ``m0``/``m1`` at parse time
(m0 = p0 x0 / sqrt(T), m1 = p1 sqrt(T)) and remembered for echoing.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .ode import CROSS_TERMS
from .params import ModelParams, PenaltyParams, uncertainty_from_fractions
from .schedule import ScheduleSpec, WeightSpec, make_schedule, read_schedule_csv
from .simulator import SimConfig

MODES = ("constant", "linear", "affine", "none", "infinite-limit")
SECTIONS = ("model", "penalties", "sim", "schedule")
_MODEL_KEYS = {f.name for f in fields(ModelParams)}
_PEN_KEYS = {f.name for f in fields(PenaltyParams)}
_SIM_KEYS = {"n_steps", "n_paths", "seed", "policy", "record_every", "workers", "grid", "record_paths"}
_SCHED_KEYS = {"kind", "csv", "weight"}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line, self.field = line, field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    pen: PenaltyParams
    mode: str
    sim: SimConfig
    grid: int | None = None
    cross_term: str | None = None
    schedule: ScheduleSpec | None = None
    weight: WeightSpec | None = None
    schedule_csv: str | None = None
    p0: float | None = None
    p1: float | None = None
    record_paths: int = 1

    @property
    def grid_size(self) -> int:
        return self.grid if self.grid is not None else self.sim.n_steps + 1

    def echo(self) -> dict:
        """Fully resolved parameters for embedding in outputs."""
        out = {
            "model": {f.name: getattr(self.model, f.name) for f in fields(ModelParams)},
            "penalties": {f.name: getattr(self.pen, f.name) for f in fields(PenaltyParams)},
            "resolved_caps": list(self.pen.caps(self.model)),
            "mode": self.mode,
            "cross_term": self.cross_term,
            "grid": self.grid_size,
            "sim": {"n_steps": self.sim.n_steps, "n_paths": self.sim.n_paths, "seed": self.sim.seed,
                    "policy": self.sim.policy, "record_every": self.sim.record_every,
                    "record_paths": self.record_paths},
        }
        if self.p0 is not None or self.p1 is not None:
            out["fractions"] = {"p0": self.p0, "p1": self.p1}
        if self.schedule is not None:
            out["schedule"] = {"kind": self.schedule.kind, "csv": self.schedule_csv,
                               "weight": self.weight.value if self.weight else 0.0}
        return out


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            current = m.group(1).strip().lower()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
            return i
    return None


def _num(text, section, key, raw, kind=float):
    try:
        if kind is int:
            v = int(raw, 0)
        else:
            v = float(raw)
    except ValueError:
        raise ConfigError(f"expected {kind.__name__}, got {raw!r}", _line_of(text, section, key),
                          f"{section}.{key}") from None
    return v


def _check_mode(mode: str, model: ModelParams, text: str) -> None:
    bad = None
    if mode == "constant" and model.m1 != 0.0:
        bad = "constant mode needs m1 = 0"
    elif mode == "linear" and model.m0 != 0.0:
        bad = "linear mode needs m0 = 0"
    elif mode == "none" and (model.m0 != 0.0 or model.m1 != 0.0):
        bad = "mode none needs m0 = m1 = 0"
    elif mode == "infinite-limit" and (model.m0 != 0.0 or model.mu != 0.0):
        bad = "infinite-limit mode needs m0 = 0 and mu = 0"
    if bad:
        raise ConfigError(bad, _line_of(text, "model", "mode"), "model.mode")


def parse_config(text: str, base_dir: str | Path = ".") -> RunConfig:
    """Parse configuration text; raises ConfigError with line and field."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]", _line_of(text, sec.lower(), "") or None)

    def section(name, allowed):
        items = dict(cp[name]) if cp.has_section(name) else {}
        for k in items:
            if k not in allowed:
                raise ConfigError("unknown key", _line_of(text, name, k), f"{name}.{k}")
        return items

    mitems = section("model", _MODEL_KEYS | {"p0", "p1", "mode", "cross_term"})
    kw = {k: _num(text, "model", k, v) for k, v in mitems.items() if k in _MODEL_KEYS}
    model = ModelParams(**kw)
    p0 = _num(text, "model", "p0", mitems["p0"]) if "p0" in mitems else None
    p1 = _num(text, "model", "p1", mitems["p1"]) if "p1" in mitems else None
    for key, given, val in (("p0", p0, "m0"), ("p1", p1, "m1")):
        if given is not None and val in mitems:
            raise ConfigError(f"give either {key} or {val}, not both", _line_of(text, "model", key),
                              f"model.{key}")
    if p0 is not None or p1 is not None:
        m0, m1 = uncertainty_from_fractions(p0 or 0.0, p1 or 0.0, model.x0, model.T)
        model = replace(model, m0=m0 if p0 is not None else model.m0, m1=m1 if p1 is not None else model.m1)
    mode = mitems.get("mode", "").strip() or model.mode
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}", _line_of(text, "model", "mode"), "model.mode")
    _check_mode(mode, model, text)
    cross = mitems.get("cross_term")
    if cross is not None:
        cross = cross.strip()
        if cross not in CROSS_TERMS:
            raise ConfigError(f"cross_term must be one of {CROSS_TERMS}",
                              _line_of(text, "model", "cross_term"), "model.cross_term")

    pitems = section("penalties", _PEN_KEYS)
    pen = PenaltyParams(**{k: _num(text, "penalties", k, v) for k, v in pitems.items()})

    sitems = section("sim", _SIM_KEYS)
    skw = {}
    for k in ("n_steps", "n_paths", "seed", "record_every", "workers"):
        if k in sitems:
            skw[k] = _num(text, "sim", k, sitems[k], int)
    policy = sitems.get("policy", "infinite-limit" if mode == "infinite-limit" else "optimal").strip()
    try:
        sim = SimConfig(policy=policy, **skw)
    except ValueError as exc:
        raise ConfigError(str(exc), None, "sim") from None
    grid = _num(text, "sim", "grid", sitems["grid"], int) if "grid" in sitems else None
    record_paths = _num(text, "sim", "record_paths", sitems["record_paths"], int) \
        if "record_paths" in sitems else 1

    citems = section("schedule", _SCHED_KEYS)
    sched = weight = csv_path = None
    if citems:
        kind = citems.get("kind", "linear").strip()
        try:
            if kind == "tabulated":
                if "csv" not in citems:
                    raise ConfigError("tabulated schedule needs csv", _line_of(text, "schedule", "kind"),
                                      "schedule.csv")
                csv_path = citems["csv"].strip()
                p = Path(csv_path)
                sched = read_schedule_csv(p if p.is_absolute() else Path(base_dir) / p, model.x0, model.T)
            else:
                sched = make_schedule(kind, model.x0, model.T)
            weight = WeightSpec("constant", _num(text, "schedule", "weight", citems.get("weight", "0")))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), _line_of(text, "schedule", "kind"), "schedule") from None
    return RunConfig(model, pen, mode, sim, grid, cross, sched, weight, csv_path, p0, p1, record_paths)


def load_config(path) -> RunConfig:
    """Read a config file. OSError propagates for the caller to report."""
    p = Path(path)
    return parse_config(p.read_text(), base_dir=p.parent)


def serialize_config(cfg: RunConfig) -> str:
    """Normalized text form: every field explicit, fractions already expanded."""
    lines = ["[model]"]
    for f in fields(ModelParams):
        lines.append(f"{f.name} = {getattr(cfg.model, f.name)!r}")
    lines.append(f"mode = {cfg.mode}")
    if cfg.cross_term is not None:
        lines.append(f"cross_term = {cfg.cross_term}")
    lines += ["", "[penalties]"]
    for f in fields(PenaltyParams):
        v = getattr(cfg.pen, f.name)
        if v is not None:
            lines.append(f"{f.name} = {v!r}")
    s = cfg.sim
    lines += ["", "[sim]", f"n_steps = {s.n_steps}", f"n_paths = {s.n_paths}", f"seed = {s.seed}",
              f"policy = {s.policy}", f"record_every = {s.record_every}", f"workers = {s.workers}",
              f"record_paths = {cfg.record_paths}"]
    if cfg.grid is not None:
        lines.append(f"grid = {cfg.grid}")
    if cfg.schedule is not None:
        lines += ["", "[schedule]", f"kind = {cfg.schedule.kind}"]
        if cfg.schedule_csv is not None:
            lines.append(f"csv = {cfg.schedule_csv}")
        lines.append(f"weight = {cfg.weight.value!r}")
    return "\n".join(lines) + "\n"
