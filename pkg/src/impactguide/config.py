"""YAML experiment files: parsing with line-precise errors, and serialization.

Layout::

    suite: fig-case1            # optional name
    engagement: {r0: 10000, gamma_M0: 60, t_d: 42, law: blf}
    gains: {sigma_max: 80}
    actuator: {a_max_g: 20, autopilot: none}
    noise: null                 # or a mapping to switch noise on
    run: {dt: 0.001, log_every: 100}
    scenarios:                  # optional; each entry overrides the sections above
      - label: s20
        engagement: {gamma_M0: 20}
    expected:
      - {scenario: s20, metric: impact_time, value: 42, tolerance: 0.1}

Angles are in degrees unless the key carries a ``_rad`` suffix; the serializer
always writes the ``_rad`` form so a round trip is exact.
"""

from __future__ import annotations

import math
import operator
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import yaml

from .actuator import G0, ActuatorConfig
from .guidance import GuidanceGains
from .runner import ConfigError, RunMetrics, ScenarioConfig
from .sensing import CHANNELS, NoiseConfig

SECTIONS = ("engagement", "gains", "actuator", "noise", "run")
TOP_KEYS = SECTIONS + ("suite", "scenarios", "expected")

# key -> (target field, converter to internal units)
_DEG = math.radians
_ENGAGEMENT_KEYS = {
    "r0": ("r0", float), "V_M": ("V_M", float), "t_d": ("t_d", float),
    "law": ("law", str), "r_lethal": ("r_lethal", float),
    "theta_L0": ("theta_L0", _DEG), "theta_L0_rad": ("theta_L0", float),
    "gamma_M0": ("gamma_M0", _DEG), "gamma_M0_rad": ("gamma_M0", float),
}
_GAIN_ANGLES = ("sigma_max", "sigma_d")
_ACTUATOR_KEYS = {
    "a_max": ("a_max", float), "a_max_g": ("a_max", lambda v: float(v) * G0),
    "n": ("n", int), "rho": ("rho", float), "autopilot": ("autopilot", str),
    "tau1": ("tau1", float), "tau2": ("tau2", float), "command_clamp": ("command_clamp", float),
}
_NOISE_KEYS = {
    "angle_sigma_mrad": ("angle_sigma", lambda v: float(v) * 1e-3),
    "angle_sigma_rad": ("angle_sigma", float),
    "range_rel_bound": ("range_rel_bound", float), "sample_rate": ("sample_rate", float),
    "seed": ("seed", int), "alpha": ("alpha", float), "beta": ("beta", float),
}
_RUN_KEYS = {"dt": ("dt", float), "t_max": ("t_max", float), "log_every": ("log_every", int)}

_NULLABLE = ("t_max", "terminal_margin")

_OPS = {"approx": None, "lt": operator.lt, "le": operator.le, "gt": operator.gt,
        "ge": operator.ge, "eq": operator.eq}


@dataclass(frozen=True)
class Check:
    """One expected value: ``metric`` of scenario ``label`` compared with ``value``."""

    label: str
    metric: str
    value: object
    tolerance: float = 0.0
    op: str = "approx"

    def evaluate(self, m: RunMetrics) -> tuple[bool, str]:
        got = getattr(m, self.metric)
        if got is None:
            return False, f"{self.label}.{self.metric} is absent"
        if self.op == "approx":
            ok = abs(got - self.value) <= self.tolerance
            rel = f"within {self.tolerance} of"
        else:
            ok = bool(_OPS[self.op](got, self.value))
            rel = self.op
        return ok, f"{self.label}.{self.metric} = {got!r} {rel} {self.value!r}"


@dataclass(frozen=True)
class ExperimentSuite:
    name: str
    scenarios: tuple
    expected: tuple = ()

    def __post_init__(self):
        labels = [s.label for s in self.scenarios]
        dup = sorted({x for x in labels if labels.count(x) > 1})
        if dup:
            raise ConfigError(f"duplicate scenario labels {dup}")
        for c in self.expected:
            if c.label not in labels:
                raise ConfigError(f"expected check references unknown scenario {c.label!r}")


# -- loading ------------------------------------------------------------------

class _Map(dict):
    line = 0
    lines: dict = {}


class _Seq(list):
    line = 0


class _Loader(yaml.SafeLoader):
    pass


def _construct_map(loader, node):
    loader.flatten_mapping(node)
    out = _Map()
    out.line = node.start_mark.line + 1
    out.lines = {}
    for k_node, v_node in node.value:
        key = loader.construct_object(k_node, deep=True)
        if key in out:
            raise ConfigError(f"line {k_node.start_mark.line + 1}: duplicate key {key!r}")
        out[key] = loader.construct_object(v_node, deep=True)
        out.lines[key] = k_node.start_mark.line + 1
    return out


def _construct_seq(loader, node):
    out = _Seq(loader.construct_sequence(node, deep=True))
    out.line = node.start_mark.line + 1
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_map)
_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_SEQUENCE_TAG, _construct_seq)


class _Where:
    """Source label used in error messages."""

    def __init__(self, source: str):
        self.source = source

    def fail(self, line: int, key: str, msg: str):
        raise ConfigError(f"{self.source}:{line}: {key}: {msg}")


def _line(m, key=None):
    if isinstance(m, _Map):
        return m.lines.get(key, m.line) if key is not None else m.line
    return 0


def _as_map(value, where: _Where, line: int, key: str) -> dict:
    if value is None:
        return _Map()
    if not isinstance(value, dict):
        where.fail(line, key, f"expected a mapping, got {type(value).__name__}")
    return value


def _convert(section: dict, table: dict, where: _Where, prefix: str) -> dict:
    out, seen = {}, {}
    for key, value in section.items():
        line = _line(section, key)
        if key not in table:
            where.fail(line, f"{prefix}.{key}", f"unknown key; expected one of {sorted(table)}")
        target, conv = table[key]
        if target in seen:
            where.fail(line, f"{prefix}.{key}", f"conflicts with {prefix}.{seen[target]}")
        seen[target] = key
        if value is None and target in _NULLABLE:
            out[target] = None
            continue
        if isinstance(value, bool) or (conv is not str and not isinstance(value, (int, float))):
            where.fail(line, f"{prefix}.{key}", f"expected a number, got {value!r}")
        if conv is str and not isinstance(value, str):
            where.fail(line, f"{prefix}.{key}", f"expected text, got {value!r}")
        if conv is int and int(value) != value:
            where.fail(line, f"{prefix}.{key}", f"expected an integer, got {value!r}")
        out[target] = conv(value)
        out.setdefault("_lines", {})[target] = (line, f"{prefix}.{key}")
    return out


def _gain_table():
    table = {}
    for f in fields(GuidanceGains):
        if f.name in _GAIN_ANGLES:
            table[f.name] = (f.name, _DEG)
            table[f.name + "_rad"] = (f.name, float)
        elif f.name in ("p", "p_f", "q_f"):
            table[f.name] = (f.name, int)
        else:
            table[f.name] = (f.name, float)
    return table


def _build(cls, kw: dict, where: _Where, section_line: int, prefix: str):
    lines = kw.pop("_lines", {})
    try:
        return cls(**kw)
    except ValueError as exc:
        msg = str(exc)
        # point at the first field the message names that the file actually set
        for target, (line, key) in lines.items():
            if re.search(rf"\b{re.escape(target)}\b", msg):
                where.fail(line, key, msg)
        where.fail(section_line, prefix, msg)


def _noise(section, where: _Where, line: int, prefix: str) -> Optional[NoiseConfig]:
    if section is None or section is False:
        return None
    section = _as_map(section, where, line, prefix)
    plain = {k: v for k, v in section.items() if k != "channel_gains"}
    plain = _Map(plain)
    plain.line, plain.lines = _line(section), getattr(section, "lines", {})
    kw = _convert(plain, _NOISE_KEYS, where, prefix)
    if "channel_gains" in section:
        cg_line = _line(section, "channel_gains")
        cg = _as_map(section["channel_gains"], where, cg_line, f"{prefix}.channel_gains")
        table = []
        for name in cg:
            pair = cg[name]
            if name not in CHANNELS:
                where.fail(_line(cg, name), f"{prefix}.channel_gains.{name}",
                           f"unknown channel; expected one of {list(CHANNELS)}")
            if not (isinstance(pair, list) and len(pair) == 2):
                where.fail(_line(cg, name), f"{prefix}.channel_gains.{name}", "expected [alpha, beta]")
            table.append((name, float(pair[0]), float(pair[1])))
        table.sort(key=lambda x: CHANNELS.index(x[0]))
        kw["channel_gains"] = tuple(table)
    return _build(NoiseConfig, kw, where, _line(section), prefix)


def _merge(base: dict, over: dict) -> dict:
    merged = _Map(base)
    merged.line = _line(over) or _line(base)
    merged.lines = dict(getattr(base, "lines", {}))
    merged.update(over)
    merged.lines.update(getattr(over, "lines", {}))
    return merged


def _scenario(top: dict, entry: dict, where: _Where, default_label: str) -> ScenarioConfig:
    sections = {}
    for name in SECTIONS:
        base = top.get(name)
        if name == "noise":
            if name in entry:
                over = entry[name]
                if over is None or base is None or not isinstance(over, dict):
                    sections[name] = (over, _line(entry, name))
                else:
                    sections[name] = (_merge(base, over), _line(entry, name))
            else:
                sections[name] = (base, _line(top, name))
            continue
        b = _as_map(base, where, _line(top, name), name)
        o = _as_map(entry.get(name), where, _line(entry, name), name)
        sections[name] = (_merge(b, o), _line(entry, name) or _line(top, name))

    eng, eng_line = sections["engagement"]
    e = _convert(eng, _ENGAGEMENT_KEYS, where, "engagement")
    g, g_line = sections["gains"]
    gains = _build(GuidanceGains, _convert(g, _gain_table(), where, "gains"), where, g_line, "gains")
    a, a_line = sections["actuator"]
    act = _build(ActuatorConfig, _convert(a, _ACTUATOR_KEYS, where, "actuator"), where, a_line, "actuator")
    nz, nz_line = sections["noise"]
    noise = _noise(nz, where, nz_line, "noise")
    rn, rn_line = sections["run"]
    run = _convert(rn, _RUN_KEYS, where, "run")

    label = entry.get("label", default_label)
    if not isinstance(label, str):
        where.fail(_line(entry, "label"), "label", f"expected text, got {label!r}")
    lines = {**e.pop("_lines", {}), **run.pop("_lines", {})}
    kw = {**e, **run, "_lines": lines}
    return _build(ScenarioConfig, {**kw, "label": label, "gains": gains, "actuator": act, "noise": noise},
                  where, eng_line or rn_line, "engagement")


def _check(item, where: _Where, line: int) -> Check:
    if not isinstance(item, dict):
        where.fail(line, "expected", f"entries must be mappings, got {item!r}")
    line = _line(item)
    for key in ("scenario", "metric", "value"):
        if key not in item:
            where.fail(line, f"expected.{key}", "missing key")
    extra = set(item) - {"scenario", "metric", "value", "tolerance", "op"}
    if extra:
        where.fail(line, "expected", f"unknown keys {sorted(extra)}")
    metric = item["metric"]
    if metric not in {f.name for f in fields(RunMetrics)}:
        where.fail(_line(item, "metric"), "expected.metric", f"unknown metric {metric!r}")
    op = item.get("op", "approx")
    if op not in _OPS:
        where.fail(_line(item, "op"), "expected.op", f"expected one of {sorted(_OPS)}")
    tol = item.get("tolerance", 0.0)
    if isinstance(tol, bool) or not isinstance(tol, (int, float)) or tol < 0:
        where.fail(_line(item, "tolerance"), "expected.tolerance", "must be a non-negative number")
    return Check(str(item["scenario"]), metric, item["value"], float(tol), op)


def parse_text(text: str, source: str = "<string>") -> ExperimentSuite:
    where = _Where(source)
    try:
        doc = yaml.load(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ConfigError(f"{source}:{mark.line + 1 if mark else 0}: malformed YAML: {exc.problem}") from None
    except ConfigError as exc:
        raise ConfigError(f"{source}:{str(exc)[len('line '):]}") from None
    if doc is None:
        doc = _Map()
    if not isinstance(doc, dict):
        where.fail(1, "<document>", "top level must be a mapping")
    for key in doc:
        if key not in TOP_KEYS:
            where.fail(_line(doc, key), key, f"unknown section; expected one of {list(TOP_KEYS)}")

    name = doc.get("suite", Path(source).stem if source != "<string>" else "suite")
    if not isinstance(name, str):
        where.fail(_line(doc, "suite"), "suite", "expected text")
    entries = doc.get("scenarios")
    if entries is None:
        entries = [_Map()]
    elif not isinstance(entries, list) or not entries:
        where.fail(_line(doc, "scenarios"), "scenarios", "expected a non-empty list")
    scenarios = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            where.fail(_line(doc, "scenarios"), f"scenarios[{i}]", "entries must be mappings")
        for key in entry:
            if key not in SECTIONS + ("label",):
                where.fail(_line(entry, key), f"scenarios[{i}].{key}", "unknown key")
        default = name if len(entries) == 1 else f"{name}-{i}"
        scenarios.append(_scenario(doc, entry, where, default))

    raw = doc.get("expected") or []
    if not isinstance(raw, list):
        where.fail(_line(doc, "expected"), "expected", "expected a list")
    checks = tuple(_check(item, where, _line(doc, "expected")) for item in raw)
    try:
        return ExperimentSuite(name, tuple(scenarios), checks)
    except ConfigError as exc:
        where.fail(_line(doc, "expected") or _line(doc, "scenarios"), "suite", str(exc))


def parse_config(path) -> ExperimentSuite:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read: {exc.strerror}") from None
    return parse_text(text, str(path))


# -- writing ------------------------------------------------------------------

def _scenario_doc(s: ScenarioConfig) -> dict:
    gains = {}
    for f in fields(GuidanceGains):
        v = getattr(s.gains, f.name)
        gains[f.name + "_rad" if f.name in _GAIN_ANGLES else f.name] = v
    act = {f.name: getattr(s.actuator, f.name) for f in fields(ActuatorConfig)}
    noise = None
    if s.noise is not None:
        n = s.noise
        noise = {"angle_sigma_rad": n.angle_sigma, "range_rel_bound": n.range_rel_bound,
                 "sample_rate": n.sample_rate, "seed": int(n.seed), "alpha": n.alpha, "beta": n.beta}
        if n.channel_gains:
            noise["channel_gains"] = {c: [a, b] for c, a, b in n.channel_gains}
    return {
        "label": s.label,
        "engagement": {"r0": s.r0, "theta_L0_rad": s.theta_L0, "gamma_M0_rad": s.gamma_M0,
                       "V_M": s.V_M, "t_d": s.t_d, "law": s.law, "r_lethal": s.r_lethal},
        "gains": gains,
        "actuator": act,
        "noise": noise,
        "run": {"dt": s.dt, "t_max": s.t_max, "log_every": s.log_every},
    }


def serialize_suite(suite: ExperimentSuite) -> str:
    doc = {"suite": suite.name, "scenarios": [_scenario_doc(s) for s in suite.scenarios]}
    if suite.expected:
        doc["expected"] = [
            {"scenario": c.label, "metric": c.metric, "value": c.value,
             "tolerance": c.tolerance, "op": c.op}
            for c in suite.expected
        ]
    return yaml.safe_dump(doc, sort_keys=False)


def override(suite: ExperimentSuite, dt: Optional[float] = None, seed: Optional[int] = None) -> ExperimentSuite:
    """Apply command-line overrides to every scenario of a suite."""
    out = []
    for s in suite.scenarios:
        if dt is not None:
            s = replace(s, dt=dt)
        if seed is not None and s.noise is not None:
            s = replace(s, noise=replace(s.noise, seed=seed))
        out.append(s)
    return replace(suite, scenarios=tuple(out))
