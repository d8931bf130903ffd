"""Run configuration files.

A config is an INI document with the sections ``[geometry]``, ``[drive]``,
``[solver]``, ``[sweep]`` and ``[output]``. List-valued keys take either
comma-separated values or ``start:stop:num`` (inclusive linspace). Every key
and its default lives in :data:`DEFAULTS`; unknown keys are rejected.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from . import exact
from .experiments import BACKENDS, GEOMETRIES, SweepSpec

REQUIRED = object()


class ConfigError(ValueError):
    pass


def _float_list(text):
    text = text.strip()
    if ":" in text and "," not in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("range must be start:stop:num")
        lo, hi, num = float(parts[0]), float(parts[1]), int(parts[2])
        if num < 1:
            raise ValueError("range needs num >= 1")
        return [float(x) for x in np.linspace(lo, hi, num)]
    vals = [v.strip() for v in text.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty list")
    return [_float(v) for v in vals]


def _float(text):
    t = str(text).strip().lower()
    if t == "pi":
        return math.pi
    if t.startswith("pi/"):
        return math.pi / float(t[3:])
    return float(t)


def _int_list(text):
    out = []
    for v in _float_list(text):
        if v != int(v):
            raise ValueError(f"{v} is not an integer")
        out.append(int(v))
    return out


def _t0(text):
    t = text.strip().lower()
    if t in ("steady", "inf", "none"):
        return None
    return _float_list(text)


def _delta(text):
    t = text.strip().lower()
    return "resonant" if t == "resonant" else _float(t)


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError("expected true or false")


def _str(text):
    return text.strip()


def _opt_str(text):
    t = text.strip()
    return t or None


def _positive(v):
    if v <= 0:
        raise ValueError("must be > 0")
    return v


#: (section, key) -> (default, parser, description)
DEFAULTS = {
    ("geometry", "family"): (REQUIRED, _str, "chain | square | ring | fixed_length | dicke | custom"),
    ("geometry", "n"): (REQUIRED, _int_list, "atom counts (square: side length)"),
    ("geometry", "a"): ("0.2", _float_list, "lattice spacings in lambda0 (fixed_length: chain lengths)"),
    ("geometry", "theta"): ("pi/2", _float_list, "drive angle to the x axis; pi/2 is normal to the array"),
    ("geometry", "positions"): ("", _opt_str, "CSV of x,y,z positions for family = custom"),
    ("drive", "omega"): ("1.0", _float_list, "Rabi frequencies in gamma0"),
    ("drive", "delta"): ("0.0", _delta, "laser detuning in gamma0, or 'resonant' for Delta = J_01"),
    ("drive", "scaled"): ("false", _bool, "if true, omega is a prefactor x and the drive is x N/2"),
    ("solver", "backend"): (REQUIRED, _str, "exact | dicke | meanfield | cumulant | two_atom"),
    ("solver", "rtol"): ("1e-8", lambda t: _positive(_float(t)), "relative integrator tolerance"),
    ("solver", "atol"): ("1e-10", lambda t: _positive(_float(t)), "absolute integrator tolerance"),
    ("solver", "null_tol"): (repr(exact.NULL_TOL), lambda t: _positive(_float(t)), "steady-state null-space tolerance"),
    ("solver", "t_max"): ("200.0", lambda t: _positive(_float(t)), "longest evolution for ODE steady states (1/gamma0)"),
    ("sweep", "t0"): ("steady", _t0, "measurement times, or 'steady'"),
    ("sweep", "threads"): ("1", lambda t: int(_positive(int(t))), "worker processes (SUPERLAB_THREADS overrides)"),
    ("sweep", "seed"): ("0", int, "recorded in the manifest; backends are deterministic"),
    ("output", "directory"): ("results", _str, "output directory"),
    ("output", "prefix"): ("run", _str, "file stem for CSV and manifest"),
}

SECTIONS = ("geometry", "drive", "solver", "sweep", "output")

#: per-subcommand keys applied before the config file and flags
PRESETS = {
    "phase-diagram": {"geometry.family": "square", "geometry.n": "2", "solver.backend": "exact",
                      "geometry.a": "0.1:1.0:19", "drive.omega": "0.25:6.0:24", "output.prefix": "phase_diagram"},
    "threshold": {"geometry.family": "dicke", "geometry.n": "10, 20, 40", "solver.backend": "dicke",
                  "drive.omega": "0.5:5.0:19", "output.prefix": "threshold"},
    "scaling": {"geometry.family": "dicke", "geometry.n": "2:12:11", "solver.backend": "dicke",
                "drive.omega": "5.0", "drive.scaled": "true", "output.prefix": "scaling"},
    "spectrum": {"geometry.family": "chain", "geometry.n": "2", "solver.backend": "exact",
                 "geometry.a": "0.05, 0.1, 0.2, 0.3, 0.5", "drive.omega": "0.0", "output.prefix": "spectrum"},
    "finite-time": {"geometry.family": "chain", "geometry.n": "2", "solver.backend": "exact",
                    "geometry.a": "0.05, 0.1, 0.2", "geometry.theta": "0, pi/2", "drive.omega": "40",
                    "sweep.t0": "5, 10, 20, 500", "output.prefix": "finite_time"},
    "two-atom": {"geometry.family": "chain", "geometry.n": "2", "solver.backend": "two_atom",
                 "drive.omega": "40", "drive.delta": "resonant", "output.prefix": "two_atom"},
}


@dataclass
class RunConfig:
    family: str
    n: list
    backend: str
    a: list = field(default_factory=lambda: [0.2])
    theta: list = field(default_factory=lambda: [math.pi / 2])
    positions: str | None = None
    omega: list = field(default_factory=lambda: [1.0])
    delta: float | str = 0.0
    scaled: bool = False
    rtol: float = 1e-8
    atol: float = 1e-10
    null_tol: float = exact.NULL_TOL
    t_max: float = 200.0
    t0: list | None = None
    threads: int = 1
    seed: int = 0
    directory: str = "results"
    prefix: str = "run"

    def sweep_spec(self) -> SweepSpec:
        return SweepSpec(self.backend, self.family, list(self.n), list(self.a), list(self.theta),
                         list(self.omega), self.delta, None if self.t0 is None else list(self.t0),
                         self.positions, self.t_max, self.rtol, self.atol, self.null_tol)


def _line_numbers(text):
    """Map ``(section, key)`` to its 1-based line in ``text``."""
    out, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip().lower()
        elif section and "=" in s and not s.startswith(("#", ";")):
            out[(section, s.split("=", 1)[0].strip().lower())] = i
    return out


def parse_config(text: str, overrides: dict | None = None, preset: dict | None = None) -> RunConfig:
    """Parse and validate a config document.

    ``preset`` supplies values below the file, ``overrides`` (both map
    ``"section.key"`` to raw strings) win over it.
    """
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"malformed config: {err}") from None
    lines = _line_numbers(text)
    raw = {}
    for dotted, value in (preset or {}).items():
        sec, _, key = dotted.partition(".")
        raw[(sec, key)] = str(value)
    for section in cp.sections():
        sec = section.lower()
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in cp.items(section):
            if (sec, key) not in DEFAULTS:
                where = f"line {lines.get((sec, key), '?')}: "
                raise ConfigError(f"{where}unknown key '{key}' in [{sec}]")
            raw[(sec, key)] = value
    for dotted, value in (overrides or {}).items():
        sec, _, key = dotted.partition(".")
        if (sec, key) not in DEFAULTS:
            raise ConfigError(f"unknown override '{dotted}'")
        raw[(sec, key)] = str(value)
        lines.pop((sec, key), None)

    values = {}
    for (sec, key), (default, parser, _) in DEFAULTS.items():
        where = f"line {lines[(sec, key)]}: " if (sec, key) in lines else ""
        if (sec, key) in raw:
            text_value = raw[(sec, key)]
        elif default is REQUIRED:
            raise ConfigError(f"missing required key '{key}' in [{sec}]")
        else:
            text_value = default
        try:
            values[key] = parser(text_value)
        except (ValueError, TypeError) as err:
            raise ConfigError(f"{where}[{sec}] {key} = {text_value!r}: {err}") from None

    if values["family"] not in GEOMETRIES:
        raise ConfigError(_at(lines, "geometry", "family") + f"unknown family {values['family']!r}")
    if values["backend"] not in BACKENDS:
        raise ConfigError(_at(lines, "solver", "backend") + f"unknown backend {values['backend']!r}")
    cfg = RunConfig(**values)
    if cfg.scaled and cfg.backend not in ("dicke", "cumulant", "exact"):
        raise ConfigError(_at(lines, "drive", "scaled") + "scaled drive is only used by emission scaling")
    try:
        cfg.sweep_spec()
    except ValueError as err:
        key = ("geometry", "n") if "N <=" in str(err) or "N =" in str(err) else ("solver", "backend")
        raise ConfigError(_at(lines, *key) + str(err)) from None
    return cfg


def _at(lines, sec, key):
    return f"line {lines[(sec, key)]}: " if (sec, key) in lines else ""


def _fmt_list(xs):
    return ", ".join(repr(float(x)) if not isinstance(x, int) else str(x) for x in xs)


def serialize(cfg: RunConfig) -> str:
    """Canonical config text with every key written out."""
    vals = {
        ("geometry", "family"): cfg.family,
        ("geometry", "n"): ", ".join(str(int(n)) for n in cfg.n),
        ("geometry", "a"): _fmt_list(cfg.a),
        ("geometry", "theta"): _fmt_list(cfg.theta),
        ("geometry", "positions"): cfg.positions or "",
        ("drive", "omega"): _fmt_list(cfg.omega),
        ("drive", "delta"): cfg.delta if cfg.delta == "resonant" else repr(float(cfg.delta)),
        ("drive", "scaled"): "true" if cfg.scaled else "false",
        ("solver", "backend"): cfg.backend,
        ("solver", "rtol"): repr(float(cfg.rtol)),
        ("solver", "atol"): repr(float(cfg.atol)),
        ("solver", "null_tol"): repr(float(cfg.null_tol)),
        ("solver", "t_max"): repr(float(cfg.t_max)),
        ("sweep", "t0"): "steady" if cfg.t0 is None else _fmt_list(cfg.t0),
        ("sweep", "threads"): str(cfg.threads),
        ("sweep", "seed"): str(cfg.seed),
        ("output", "directory"): cfg.directory,
        ("output", "prefix"): cfg.prefix,
    }
    out = []
    for sec in SECTIONS:
        out.append(f"[{sec}]")
        for (s, key) in DEFAULTS:
            if s == sec:
                out.append(f"{key} = {vals[(s, key)]}")
        out.append("")
    return "\n".join(out)


def defaults_text() -> str:
    rows = []
    for (sec, key), (default, _, doc) in DEFAULTS.items():
        d = "<required>" if default is REQUIRED else (default if default != "" else "<empty>")
        rows.append(f"{sec + '.' + key:<20} {d:<12} {doc}")
    for cmd, preset in PRESETS.items():
        rows.append("")
        rows.append(f"preset for '{cmd}':")
        rows += [f"  {k:<18} {v}" for k, v in preset.items()]
    return "\n".join(rows)
