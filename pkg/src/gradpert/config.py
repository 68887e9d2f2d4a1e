"""Experiment configuration: an INI file with one section per concern.

Sections are ``kernel``, ``drift``, ``control``, ``grid``, ``samples`` and
``output``, plus one optional section per command (``tabulate`` for ``kp kernel``,
``series``, ``conditions``, ``partition``, ``scan``, ``verify``).  Every value is
validated while parsing; problems surface as ``ConfigError``.  ``echo``
writes the fully resolved configuration back out in canonical form, and
parsing that text reproduces an equal ``ExperimentConfig``.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields

from .conditions import ControlPair, Rate, TabulatedF
from .drift import DriftField
from .errors import ConfigError
from .kernel import KernelParams
from .quadrature import GridSpec

__all__ = ["ExperimentConfig", "DriftSpec", "ControlSpec", "SampleSpec", "load_config", "parse_config",
           "COMMANDS", "SCANS"]

COMMANDS = ("kernel", "series", "conditions", "partition", "scan", "verify")
SCANS = ("gradient", "3p_hat", "3p_plain", "php", "envelope")
_BOUND_COMMANDS = ("series", "conditions", "partition", "verify")
# option section per command; ``kernel`` already names the parameter section
SECTION_OF = {c: c for c in COMMANDS} | {"kernel": "tabulate"}
_DRIFTS = {"zero": "Zero", "constant": "Constant", "power_law": "PowerLaw", "kernel_power": "KernelPower",
           "tabulated": "Tabulated"}

# command options: name -> (type, default)
_COMMAND_OPTIONS = {
    "kernel": {"quantities": ("strlist", ("density", "gradient", "envelope", "hat"))},
    "series": {"order": ("int", 8), "check_bounds": ("bool", True), "bound_mode": ("str", "P-class")},
    "conditions": {"indicator_gammas": ("floatlist", ()), "split_pairs": ("bool", True)},
    "partition": {"theta": ("float", 0.4), "start": ("float", 0.0), "end": ("float", 1.0)},
    "scan": {"scans": ("strlist", SCANS), "t_min": ("float", 1e-2), "t_max": ("float", 1e2),
             "x_min": ("float", 1e-2), "x_max": ("float", 50.0), "levels": ("intlist", (17, 33, 65)),
             "pair_levels": ("intlist", (5, 9, 17))},
    "verify": {"criteria": ("intlist", tuple(range(1, 13)))},
}


@dataclass(frozen=True)
class DriftSpec:
    family: str = "zero"
    c: float = 0.0
    epsilon: float | None = None
    direction: str = "inward"
    z_grid: tuple = ()
    values: tuple = ()

    def build(self, params: KernelParams) -> DriftField:
        if self.family == "zero":
            return DriftField.zero()
        if self.family == "constant":
            return DriftField.constant(self.c)
        if self.family == "power_law":
            return DriftField.power_law(self.epsilon, params, self.direction)
        if self.family == "kernel_power":
            return DriftField.kernel_power(params, self.direction)
        return DriftField.tabulated(list(self.z_grid), list(self.values))


@dataclass(frozen=True)
class ControlSpec:
    """``Q`` given by ``rate`` or by a tabulated ``F`` (``knots``, ``values``, ``kind``)."""

    eta: float | None = None
    rate: float | None = None
    knots: tuple = ()
    values: tuple = ()
    kind: str = "step"

    def form(self):
        if self.knots:
            return TabulatedF(self.knots, self.values, self.kind)
        return Rate(self.rate if self.rate is not None else 0.0)

    def pair(self) -> ControlPair:
        return ControlPair(self.eta if self.eta is not None else 0.0, self.form())


@dataclass(frozen=True)
class SampleSpec:
    s: float = 0.0
    t: float = 0.5
    x: tuple = (-0.5, 0.0, 0.5)
    y: tuple = (-0.5, -0.2, 0.0, 0.2, 0.5)
    times: tuple = (0.1, 0.5, 1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    kernel: KernelParams
    drift: DriftSpec
    control: ControlSpec
    grid: GridSpec
    samples: SampleSpec
    options: tuple = ()
    output_prefix: str = "kp"
    source: str = field(default="", compare=False)

    def option(self, name):
        return dict(self.options)[name]

    def drift_field(self) -> DriftField:
        return self.drift.build(self.kernel)

    def echo(self) -> str:
        """Canonical INI text of the resolved configuration."""
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        k = self.kernel
        cp["run"] = {"command": self.command}
        cp["kernel"] = {"alpha": _fmt(k.alpha), "beta": _fmt(k.beta_index), "a": _fmt(k.a), "dim": str(k.dim)}
        d = self.drift
        cp["drift"] = {"family": d.family, "c": _fmt(d.c), "epsilon": _fmt(d.epsilon), "direction": d.direction,
                       "z_grid": _fmt(d.z_grid), "values": _fmt(d.values)}
        c = self.control
        cp["control"] = {"eta": _fmt(c.eta), "rate": _fmt(c.rate), "knots": _fmt(c.knots),
                         "values": _fmt(c.values), "kind": c.kind}
        g = self.grid
        cp["grid"] = {"n_time": str(g.n_time), "n_space": str(g.n_space), "L": _fmt(g.L),
                      "grading": _fmt(g.grading_exponent), "tol": _fmt(g.tol), "max_refine": str(g.max_refine)}
        sm = self.samples
        cp["samples"] = {f.name: _fmt(getattr(sm, f.name)) for f in fields(SampleSpec)}
        cp["output"] = {"prefix": self.output_prefix}
        cp[SECTION_OF[self.command]] = {name: _fmt(v) for name, v in self.options}
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines += [f"{key} = {val}" for key, val in cp[sec].items()]
            lines.append("")
        return "\n".join(lines)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(e) for e in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


class _Section:
    """Typed reads from one INI section; remembers which keys were used."""

    def __init__(self, cp, name):
        self.name = name
        self.data = dict(cp[name]) if cp.has_section(name) else {}
        self.used = set()

    def _raw(self, key):
        self.used.add(key.lower())
        v = self.data.get(key.lower())
        return None if v is None or v.strip() == "" else v.strip()

    def _err(self, key, what, raw):
        return ConfigError(f"[{self.name}] {key}: expected {what}, got {raw!r}")

    def float(self, key, default=None):
        raw = self._raw(key)
        if raw is None:
            return default
        try:
            v = float(raw)
        except ValueError:
            raise self._err(key, "a number", raw) from None
        if not math.isfinite(v):
            raise self._err(key, "a finite number", raw)
        return v

    def int(self, key, default=None):
        raw = self._raw(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise self._err(key, "an integer", raw) from None

    def str(self, key, default=None):
        raw = self._raw(key)
        return default if raw is None else raw

    def bool(self, key, default=None):
        raw = self._raw(key)
        if raw is None:
            return default
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise self._err(key, "a boolean", raw)

    def _list(self, key, conv, what, default):
        raw = self._raw(key)
        if raw is None:
            return tuple(default)
        try:
            return tuple(conv(p.strip()) for p in raw.split(",") if p.strip())
        except ValueError:
            raise self._err(key, what, raw) from None

    def floatlist(self, key, default=()):
        return self._list(key, float, "comma-separated numbers", default)

    def intlist(self, key, default=()):
        return self._list(key, int, "comma-separated integers", default)

    def strlist(self, key, default=()):
        return self._list(key, str, "comma-separated names", default)

    def check_unknown(self):
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigError(f"[{self.name}] unknown keys: {', '.join(extra)}")


def parse_config(text: str, command: str | None = None) -> ExperimentConfig:
    """Parse INI ``text``; ``command`` overrides ``[run] command``."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from None
    known = {"run", "kernel", "drift", "control", "grid", "samples", "output", *SECTION_OF.values()}
    extra = sorted(set(cp.sections()) - known)
    if extra:
        raise ConfigError(f"unknown sections: {', '.join(extra)}")

    run = _Section(cp, "run")
    cmd = command or run.str("command")
    run.used.add("command")
    run.check_unknown()
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}, got {cmd!r}")

    sec = _Section(cp, "kernel")
    alpha = sec.float("alpha", 1.5)
    beta = sec.float("beta")
    a = sec.float("a", 0.0)
    dim = sec.int("dim", 1)
    sec.check_unknown()
    try:
        params = KernelParams(alpha, beta, a, dim)
    except ValueError as exc:
        raise ConfigError(f"[kernel] {exc}") from None

    sec = _Section(cp, "drift")
    family = sec.str("family", "zero").lower()
    if family not in _DRIFTS:
        raise ConfigError(f"[drift] family must be one of {', '.join(_DRIFTS)}, got {family!r}")
    drift = DriftSpec(family, sec.float("c", 0.0), sec.float("epsilon"), sec.str("direction", "inward"),
                      sec.floatlist("z_grid"), sec.floatlist("values"))
    sec.check_unknown()
    try:
        drift.build(params)
    except ValueError as exc:
        raise ConfigError(f"[drift] {exc}") from None

    sec = _Section(cp, "control")
    control = ControlSpec(sec.float("eta"), sec.float("rate"), sec.floatlist("knots"), sec.floatlist("values"),
                          sec.str("kind", "step"))
    sec.check_unknown()
    _check_control(control, cmd)

    sec = _Section(cp, "grid")
    try:
        grid = GridSpec(n_time=sec.int("n_time", 16), n_space=sec.int("n_space", 201), L=sec.float("L", 10.0),
                        grading_exponent=sec.float("grading"), tol=sec.float("tol", 1e-6),
                        max_refine=sec.int("max_refine", 3))
    except ValueError as exc:
        raise ConfigError(f"[grid] {exc}") from None
    sec.check_unknown()
    if grid.n_space % 2 == 0:
        raise ConfigError("[grid] n_space must be odd")

    sec = _Section(cp, "samples")
    d = SampleSpec()
    samples = SampleSpec(sec.float("s", d.s), sec.float("t", d.t), sec.floatlist("x", d.x),
                         sec.floatlist("y", d.y), sec.floatlist("times", d.times))
    sec.check_unknown()
    if not samples.t > samples.s:
        raise ConfigError("[samples] need s < t")
    if not samples.x or not samples.y:
        raise ConfigError("[samples] x and y must be non-empty")
    if any(u <= 0 for u in samples.times):
        raise ConfigError("[samples] times must be positive")

    sec = _Section(cp, "output")
    prefix = sec.str("prefix", "kp")
    sec.check_unknown()

    opts = _command_options(cp, cmd)
    return ExperimentConfig(cmd, params, drift, control, grid, samples, opts, prefix, source=text)


def _check_control(control: ControlSpec, cmd):
    if control.eta is not None and cmd in _BOUND_COMMANDS and not 0.0 <= control.eta < 0.5:
        raise ConfigError(f"[control] eta must lie in [0, 1/2) for bound commands, got {control.eta}")
    if control.rate is not None and control.rate < 0:
        raise ConfigError("[control] rate must be non-negative")
    if control.knots:
        if control.rate is not None:
            raise ConfigError("[control] give either rate or knots/values, not both")
        try:
            TabulatedF(control.knots, control.values, control.kind)
        except ValueError as exc:
            raise ConfigError(f"[control] {exc}") from None


def _command_options(cp, cmd):
    sec = _Section(cp, SECTION_OF[cmd])
    opts = []
    for name, (kind, default) in _COMMAND_OPTIONS[cmd].items():
        v = getattr(sec, kind)(name, default)
        opts.append((name, tuple(v) if isinstance(v, tuple) else v))
    sec.check_unknown()
    o = dict(opts)
    if cmd == "series" and o["order"] < 0:
        raise ConfigError("[series] order must be >= 0")
    if cmd == "series" and o["bound_mode"] not in ("P-class", "N-class"):
        raise ConfigError("[series] bound_mode must be P-class or N-class")
    if cmd == "partition" and not (o["theta"] > 0 and o["end"] > o["start"]):
        raise ConfigError("[partition] need theta > 0 and start < end")
    if cmd == "scan":
        bad = [s for s in o["scans"] if s not in SCANS]
        if bad:
            raise ConfigError(f"[scan] unknown scans: {', '.join(bad)}")
        if not (0 < o["t_min"] < o["t_max"] and 0 < o["x_min"] < o["x_max"]):
            raise ConfigError("[scan] need 0 < t_min < t_max and 0 < x_min < x_max")
        if len(o["levels"]) < 2 or len(o["pair_levels"]) < 2:
            raise ConfigError("[scan] at least two refinement levels are needed")
    if cmd == "verify":
        bad = [c for c in o["criteria"] if not 1 <= c <= 12]
        if bad:
            raise ConfigError(f"[verify] criteria must lie in 1..12, got {bad}")
    if cmd == "conditions" and any(not 0 < g <= 2 for g in o["indicator_gammas"]):
        raise ConfigError("[conditions] indicator gammas must lie in (0, 2]")
    return tuple(opts)


def load_config(path, command=None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, command)
