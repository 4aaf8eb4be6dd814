"""
Scenario files: a YAML document describing one simulation run.

Top-level keys (all optional except ``sim``, ``references`` and
``disturbances``)::

    name: str
    description: str
    sim:                      # integration settings
      t_end: float            # s, required
      dt: float               # s, default 1.0e-6
      decimate: int           # store every n-th step, default 100
      interval: float         # s, reference switch grid, default 1.0
      backstepping: str       # "exact" (default) or "simplified"
    params: {C1: F, ..., L3: H, ..., R1: Ohm, ..., f: Hz}   # overrides of the defaults
    gains: {K1: 1/s, ...}     # overrides of ControllerGains.design(params)
    references:               # piecewise constant, one entry per switch
      - {t_start: s, x1_star: V, x4_star: V, x9_star: V, x11_star: A, x12_star: A}
    disturbances:             # per signal: list of segments
      V_PV: [{t_start: s, kind: constant, value: V}, ...]
      ...                     # V_B, V_S (V), R_L (Ohm), v_ld, v_lq (V), omega (rad/s)
    initial_state: [12 or 18 numbers]   # default: equilibrium of the first block

Segment keys by kind: ``constant`` (value), ``step`` (value, t_step, after),
``ramp`` (value, slope), ``sine`` (value, slope, amplitude, frequency [Hz],
phase [rad]). ``v_ld``, ``v_lq`` and ``omega`` default to constants 325 V,
0 V and ``2 pi f``.
"""
import math
from dataclasses import fields
from importlib import resources

import yaml

from .controllers import ControllerGains, ReferenceSet
from .errors import ParseError, ScheduleGap, ValidationError
from .plant import Disturbances, GridParams, validate_params
from .schedules import KINDS, SIGNALS, Segment
from .simulator import BACKSTEPPING, DEFAULT_DT, Scenario

TOP_KEYS = ("name", "description", "sim", "params", "gains", "references", "disturbances",
            "initial_state")
SIM_KEYS = ("t_end", "dt", "decimate", "interval", "backstepping")
REF_KEYS = ("t_start", "x1_star", "x4_star", "x9_star", "x11_star", "x12_star")
SEGMENT_KEYS = {
    "constant": ("value",),
    "step": ("value", "t_step", "after"),
    "ramp": ("value", "slope"),
    "sine": ("value", "slope", "amplitude", "frequency", "phase"),
}
SEGMENT_REQUIRED = {
    "constant": ("value",),
    "step": ("value", "t_step", "after"),
    "ramp": ("value", "slope"),
    "sine": ("value", "amplitude", "frequency"),
}
POSITIVE_SIGNALS = ("V_PV", "V_B", "V_S", "R_L")
PARAM_KEYS = tuple(f.name for f in fields(GridParams))
GAIN_KEYS = tuple(f.name for f in fields(ControllerGains))


# --- reading -----------------------------------------------------------------

def _plain(node, path, lines, ctor):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for knode, vnode in node.value:
            key = ctor.construct_object(knode, deep=True)
            if not isinstance(key, str):
                raise ParseError([f"line {knode.start_mark.line + 1}: mapping keys must be "
                                  f"strings, got {key!r}"])
            if key in out:
                raise ParseError([f"line {knode.start_mark.line + 1}: {key}: duplicate key"])
            out[key] = _plain(vnode, path + (key,), lines, ctor)
            lines[path + (key,)] = knode.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_plain(v, path + (i,), lines, ctor) for i, v in enumerate(node.value)]
    return ctor.construct_object(node, deep=True)


def _load(text):
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else "?"
        raise ParseError([f"line {line}: {exc.problem or exc}"]) from None
    except yaml.YAMLError as exc:
        raise ParseError([str(exc)]) from None
    if node is None:
        raise ParseError(["line 1: document is empty"])
    if not isinstance(node, yaml.MappingNode):
        raise ParseError([f"line {node.start_mark.line + 1}: top level must be a mapping"])
    lines = {}
    try:
        data = _plain(node, (), lines, yaml.SafeLoader(""))
    except yaml.constructor.ConstructorError as exc:
        raise ParseError([f"line {exc.problem_mark.line + 1}: {exc.problem}"]) from None
    return data, lines


class _Checker:
    """Collects (line, key, reason) messages while converting the plain tree."""

    def __init__(self, lines):
        self.lines = lines
        self.errors = []

    def line(self, path):
        while path and path not in self.lines:
            path = path[:-1]
        return self.lines.get(path, 1)

    def error(self, path, reason):
        key = ".".join(str(p) if isinstance(p, str) else f"[{p}]" for p in path) or "<root>"
        key = key.replace(".[", "[")
        self.errors.append(f"line {self.line(path)}: {key}: {reason}")

    def mapping(self, value, path, allowed, required=()):
        if not isinstance(value, dict):
            self.error(path, "expected a mapping")
            return None
        for k in value:
            if k not in allowed:
                self.error(path + (k,), "unknown key")
        for k in required:
            if k not in value:
                self.error(path, f"missing required key {k!r}")
        return value

    def number(self, value, path, positive=False, integer=False):
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.error(path, f"expected a number, got {value!r}")
            return None
        if not math.isfinite(value):
            self.error(path, "must be finite")
            return None
        if integer:
            if int(value) != value:
                self.error(path, "must be an integer")
                return None
            value = int(value)
        else:
            value = float(value)
        if positive and not value > 0:
            self.error(path, "must be > 0")
        return value


def _segments(ck, name, items, path):
    if not isinstance(items, list) or not items:
        ck.error(path, "expected a non-empty list of segments")
        return None
    out = []
    for i, item in enumerate(items):
        p = path + (i,)
        if not isinstance(item, dict):
            ck.error(p, "expected a mapping")
            continue
        kind = item.get("kind", "constant")
        if kind not in KINDS:
            ck.error(p + ("kind",), f"unknown segment kind {kind!r}; expected one of {KINDS}")
            continue
        allowed = ("t_start", "kind") + SEGMENT_KEYS[kind]
        ck.mapping(item, p, allowed, ("t_start",) + SEGMENT_REQUIRED[kind])
        vals = {}
        for key in allowed:
            if key in item and key != "kind":
                vals[key] = ck.number(item[key], p + (key,))
        if any(v is None for v in vals.values()) or not all(
                k in vals for k in ("t_start",) + SEGMENT_REQUIRED[kind]):
            continue
        if name in POSITIVE_SIGNALS:
            for key in ("value", "after"):
                if key in vals and kind in ("constant", "step") and not vals[key] > 0:
                    ck.error(p + (key,), f"{name} must be > 0")
        out.append(Segment(kind=kind, **vals))
    return out


def _build(data, lines):
    ck = _Checker(lines)
    ck.mapping(data, (), TOP_KEYS, ("sim", "references", "disturbances"))

    for key in ("name", "description"):
        if key in data and not isinstance(data[key], str):
            ck.error((key,), "expected a string")

    # params
    params = GridParams()
    praw = data.get("params") or {}
    if ck.mapping(praw, ("params",), PARAM_KEYS) is not None:
        vals = {k: ck.number(v, ("params", k)) for k, v in praw.items() if k in PARAM_KEYS}
        if all(v is not None for v in vals.values()):
            params = GridParams(**vals)
            for msg in validate_params(params):
                ck.error(("params", msg.split()[0]), msg)

    # sim
    sim = {}
    sraw = data.get("sim")
    if sraw is not None and ck.mapping(sraw, ("sim",), SIM_KEYS, ("t_end",)) is not None:
        for k in ("t_end", "dt", "interval"):
            if k in sraw:
                sim[k] = ck.number(sraw[k], ("sim", k), positive=True)
        if "decimate" in sraw:
            sim["decimate"] = ck.number(sraw["decimate"], ("sim", "decimate"), positive=True,
                                        integer=True)
        if "backstepping" in sraw:
            if sraw["backstepping"] not in BACKSTEPPING:
                ck.error(("sim", "backstepping"), f"expected one of {sorted(BACKSTEPPING)}")
            else:
                sim["backstepping"] = sraw["backstepping"]

    # gains
    gains = None
    graw = data.get("gains") or {}
    if ck.mapping(graw, ("gains",), GAIN_KEYS) is not None and not validate_params(params):
        vals = {k: ck.number(v, ("gains", k), positive=True)
                for k, v in graw.items() if k in GAIN_KEYS}
        if all(v is not None and v > 0 for v in vals.values()):
            try:
                base = ControllerGains.design(params)
                gains = base.replace(**vals) if vals else base
                gains.check(params)
            except ValueError as exc:
                ck.error(("gains",), str(exc))
                gains = None

    # references
    refs = []
    rraw = data.get("references")
    if rraw is not None:
        if not isinstance(rraw, list) or not rraw:
            ck.error(("references",), "expected a non-empty list")
        else:
            for i, item in enumerate(rraw):
                p = ("references", i)
                if ck.mapping(item, p, REF_KEYS, ("t_start", "x1_star", "x4_star",
                                                  "x9_star")) is None:
                    continue
                vals = {k: ck.number(item[k], p + (k,)) for k in REF_KEYS if k in item}
                if any(v is None for v in vals.values()) or len(
                        set(("t_start", "x1_star", "x4_star", "x9_star")) - set(vals)):
                    continue
                t = vals.pop("t_start")
                for k in ("x1_star", "x4_star", "x9_star"):
                    if not vals[k] > 0:
                        ck.error(p + (k,), "must be > 0")
                refs.append((t, ReferenceSet(**vals)))

    # disturbances
    dist = {}
    draw = data.get("disturbances")
    if draw is not None and ck.mapping(draw, ("disturbances",), SIGNALS,
                                       POSITIVE_SIGNALS) is not None:
        for name in SIGNALS:
            if name in draw:
                segs = _segments(ck, name, draw[name], ("disturbances", name))
                if segs is not None:
                    dist[name] = segs
        defaults = Disturbances(1.0, 1.0, 1.0, 1.0, omega=params.omega)
        for name in ("v_ld", "v_lq", "omega"):
            dist.setdefault(name, [Segment(0.0, "constant", value=getattr(defaults, name))])

    x0 = None
    if data.get("initial_state") is not None:
        raw = data["initial_state"]
        if not isinstance(raw, list) or len(raw) not in (12, 18):
            ck.error(("initial_state",), "expected a list of 12 or 18 numbers")
        else:
            x0 = [ck.number(v, ("initial_state", i)) for i, v in enumerate(raw)]

    if ck.errors:
        raise ValidationError(ck.errors)

    kw = {k: v for k, v in sim.items()}
    kw.setdefault("dt", DEFAULT_DT)
    try:
        sc = Scenario(references=refs, disturbances=dist, initial_state=x0, params=params,
                      gains=gains if gains is not None else ControllerGains.design(params),
                      name=data.get("name", ""), description=data.get("description", ""), **kw)
        sc.n_steps
        sc.compile()
    except (ValueError, ScheduleGap) as exc:
        ck.error(("sim",), str(exc))
        raise ValidationError(ck.errors) from None
    return sc


def loads_scenario(text):
    """Parse scenario text. Raises :class:`ParseError` or :class:`ValidationError`."""
    data, lines = _load(text)
    return _build(data, lines)


def parse_scenario(path):
    """Read and validate a scenario file.

    Raises
    ------
    ParseError
        The file is unreadable, empty or not valid YAML.
    ValidationError
        The document violates the schema; ``errors`` lists every problem as
        ``"line N: key: reason"``.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError([f"{path}: {exc.strerror}"]) from None
    return loads_scenario(text)


# --- writing -----------------------------------------------------------------

def _segment_dict(seg):
    out = {"t_start": seg.t_start, "kind": seg.kind}
    for key in SEGMENT_KEYS[seg.kind]:
        out[key] = getattr(seg, key)
    return out


def scenario_to_dict(sc):
    """Plain-data form of a scenario; every parameter and gain is written out."""
    out = {}
    if sc.name:
        out["name"] = sc.name
    if sc.description:
        out["description"] = sc.description
    out["sim"] = {"t_end": sc.t_end, "dt": sc.dt, "decimate": int(sc.decimate),
                  "interval": sc.interval, "backstepping": sc.backstepping}
    out["params"] = {k: getattr(sc.params, k) for k in PARAM_KEYS}
    out["gains"] = {k: getattr(sc.gains, k) for k in GAIN_KEYS}
    out["references"] = [{"t_start": t, **{f"{k}": v for k, v in zip(REF_KEYS[1:], r.as_array().tolist())}}
                         for t, r in sc.references]
    out["disturbances"] = {name: [_segment_dict(s) for s in sc.disturbances[name]]
                           for name in SIGNALS if name in sc.disturbances}
    if sc.initial_state is not None:
        out["initial_state"] = list(sc.initial_state)
    return out


def dumps_scenario(sc):
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None)


def write_scenario(sc, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_scenario(sc))


def bundled_path(name="replica"):
    """Path of a scenario file shipped with the package."""
    return str(resources.files("acdc_microgrid") / "data" / f"{name}.yaml")


def load_bundled(name="replica"):
    """Parse a scenario file shipped with the package (``"replica"``: the 20 s reference run)."""
    return parse_scenario(bundled_path(name))
