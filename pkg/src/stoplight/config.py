"""Layered TOML experiment configuration with explicit units.

Physical values are strings ``"<number> <unit>"``.  Parsing converts them
to internal units (Gamma multiples for Rabi frequencies and detunings,
seconds, metres, rad/s, rad/m) and ``serialize`` writes them back in
those canonical units, so ``serialize(parse(x)) == normalize(x)``.
"""

from __future__ import annotations

import copy
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .counts import Calibration
from .eit import RB87_D1_GAMMA, AtomicMedium, ControlFieldSpec
from .errors import ConfigError
from .schedule import DEFAULT_RAMP, MeasurementTiming
from .solver import SolverConfig

__all__ = [
    "KINDS",
    "SCHEMA",
    "ExperimentConfig",
    "parse_quantity",
    "format_quantity",
    "default_document",
    "load_config",
    "loads_config",
    "merge",
    "apply_overrides",
    "normalize",
    "serialize",
]

_TWO_PI = 2.0 * math.pi

# unit -> factor to the canonical unit; entries marked "G" scale with Gamma
_UNITS = {
    "gamma": {"Gamma": (1.0, None), "rad/s": (1.0, "G"), "Hz": (_TWO_PI, "G"), "kHz": (_TWO_PI * 1e3, "G"),
              "MHz": (_TWO_PI * 1e6, "G")},
    "time": {"s": (1.0, None), "ms": (1e-3, None), "us": (1e-6, None), "µs": (1e-6, None), "ns": (1e-9, None),
             "/Gamma": (1.0, "T")},
    "transit": {"/Gamma": (1.0, None), "s": (1.0, "GT"), "ns": (1e-9, "GT"), "us": (1e-6, "GT")},
    "length": {"m": (1.0, None), "cm": (1e-2, None), "mm": (1e-3, None), "um": (1e-6, None), "µm": (1e-6, None)},
    "rate": {"rad/s": (1.0, None), "Hz": (_TWO_PI, None), "kHz": (_TWO_PI * 1e3, None),
             "MHz": (_TWO_PI * 1e6, None)},
    "count_rate": {"/s": (1.0, None), "Hz": (1.0, None), "kHz": (1e3, None)},
    "wavenumber": {"rad/m": (1.0, None), "rad/cm": (1e2, None), "rad/mm": (1e3, None), "rad/L": (1.0, "L")},
}
_CANONICAL = {"gamma": "Gamma", "time": "s", "transit": "/Gamma", "length": "m", "rate": "rad/s",
              "count_rate": "/s", "wavenumber": "rad/m"}
KINDS = tuple(_UNITS) + ("number", "int", "bool", "str", "optional_time")

#: section -> key -> (kind, default); defaults describe the storage-and-retrieval setup
SCHEMA = {
    "medium": {
        "gamma": ("rate", repr(RB87_D1_GAMMA) + " rad/s"),
        "gamma21": ("gamma", "0.0 Gamma"),
        "d_opt": ("number", 109.0),
        "length": ("length", "0.03 m"),
    },
    "controls": {
        "rabi_plus": ("gamma", "3.6 Gamma"),
        "rabi_minus": ("gamma", "0.0 Gamma"),
        "detuning_probe": ("gamma", "0.0 Gamma"),
        "detuning_plus": ("gamma", "0.0 Gamma"),
        "detuning_minus": ("gamma", "2.5 Gamma"),
    },
    "schedule": {
        "mode": ("str", "lsr"),
        "tau_p": ("time", "1.5e-07 s"),
        "tau_lsr": ("time", "2e-07 s"),
        "tau_slp": ("time", "5e-07 s"),
        "ramp": ("time", repr(DEFAULT_RAMP) + " s"),
        "probe_peak": ("number", 1e-4),
        "t_probe": ("optional_time", ""),
        "t_switch": ("optional_time", ""),
        "t_end": ("optional_time", ""),
    },
    "solver": {
        "nz": ("int", 256),
        "light_transit": ("transit", "0.25 /Gamma"),
        "phase_mismatch": ("wavenumber", "0.0 rad/m"),
        "decay_convention": ("str", "amplitude"),
    },
    "analysis": {
        "bin": ("time", "3e-08 s"),
        "n_cycles": ("int", 60),
        "n_cycles_reference": ("int", 60),
        "nbar": ("number", 1.1),
        "background_rate": ("count_rate", "11000.0 /s"),
        "background_rate_reference": ("count_rate", "7000.0 /s"),
        "detector_efficiency": ("number", 1.0),
        "path_transmission": ("number", 1.0),
        "snr_half_window": ("optional_time", ""),
        "fit_margin": ("time", "4.5e-07 s"),
    },
}
_MODES = ("slow-light", "lsr", "slp")
_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")


def parse_quantity(text, kind: str, *, gamma: float = RB87_D1_GAMMA, length: float = 1.0) -> float:
    """Convert ``"<number> <unit>"`` to the canonical unit of ``kind``.

    Raises
    ------
    ConfigError
        Unitless input, unknown unit, or malformed number.
    """
    if not isinstance(text, str):
        raise ConfigError(f"physical value {text!r} needs an explicit unit")
    m = _NUM.match(text)
    if not m:
        raise ConfigError(f"cannot parse quantity {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    if not unit:
        raise ConfigError(f"physical value {text!r} needs an explicit unit")
    table = _UNITS[kind]
    if unit not in table:
        raise ConfigError(f"unit {unit!r} not allowed here; use one of {', '.join(table)}")
    factor, tag = table[unit]
    v = value * factor
    if tag == "G":
        v /= gamma
    elif tag == "T":
        v /= gamma
    elif tag == "GT":
        v *= gamma
    elif tag == "R":
        v *= gamma
    elif tag == "L":
        v /= length
    if not math.isfinite(v):
        raise ConfigError(f"non-finite quantity {text!r}")
    return v


def format_quantity(value: float, kind: str) -> str:
    return f"{float(value)!r} {_CANONICAL[kind]}"


def default_document() -> dict:
    """Raw (string-valued) document with every key at its default."""
    doc = {sec: {k: d for k, (_, d) in keys.items() if d != ""} for sec, keys in SCHEMA.items()}
    doc["seed"] = 0
    return doc


def merge(base: dict, layer: dict) -> dict:
    """Deep-merge ``layer`` over ``base`` (later layers win)."""
    out = copy.deepcopy(base)
    for k, v in layer.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check_keys(doc: dict):
    for sec, val in doc.items():
        if sec == "seed":
            continue
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        if not isinstance(val, dict):
            raise ConfigError(f"[{sec}] must be a table")
        for k in val:
            if k not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {sec}.{k}")


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``section.key=value`` strings; numbers and booleans are decoded as TOML."""
    out = copy.deepcopy(doc)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not section.key=value")
        path, raw = item.split("=", 1)
        path = path.strip()
        try:
            value = tomllib.loads(f"v = {raw.strip()}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw.strip()
        if path == "seed":
            out["seed"] = value
            continue
        sec, _, key = path.partition(".")
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError(f"invalid parameter path {path!r}")
        out.setdefault(sec, {})[key] = value
    return out


@dataclass
class ExperimentConfig:
    """Resolved configuration; all values in internal units."""

    medium: AtomicMedium
    controls: ControlFieldSpec
    schedule: dict
    solver: SolverConfig
    analysis: dict
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def mode(self) -> str:
        return self.schedule["mode"]

    @property
    def calibration(self) -> Calibration:
        return Calibration(self.analysis["detector_efficiency"], self.analysis["path_transmission"])

    @property
    def timing(self) -> MeasurementTiming:
        return MeasurementTiming()

    def with_value(self, path: str, value) -> "ExperimentConfig":
        """Copy with one ``section.key`` replaced by an internal-unit value."""
        sec, _, key = path.partition(".")
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError(f"invalid parameter path {path!r}")
        kind = SCHEMA[sec][key][0]
        doc = copy.deepcopy(self.raw)
        doc.setdefault(sec, {})[key] = _emit(kind, value)
        return from_document(doc)

    def to_document(self) -> dict:
        return copy.deepcopy(self.raw)


def _emit(kind, value):
    if kind in _UNITS:
        return format_quantity(value, kind)
    if kind == "optional_time":
        return "" if value is None else format_quantity(value, "time")
    if kind == "int":
        return int(value)
    if kind == "number":
        return float(value)
    return value


def _resolve(kind, raw, path, gamma, length):
    if kind in _UNITS:
        return parse_quantity(raw, kind, gamma=gamma, length=length)
    if kind == "optional_time":
        if raw in ("", None):
            return None
        return parse_quantity(raw, "time", gamma=gamma)
    if kind == "int":
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ConfigError(f"{path} must be an integer")
        return raw
    if kind == "number":
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ConfigError(f"{path} must be a plain number")
        return float(raw)
    if kind == "str":
        if not isinstance(raw, str):
            raise ConfigError(f"{path} must be a string")
        return raw
    raise ConfigError(f"unsupported kind {kind}")  # pragma: no cover


def from_document(doc: dict) -> ExperimentConfig:
    """Validate a raw document layered over the defaults and build objects."""
    _check_keys(doc)
    full = merge(default_document(), doc)
    seed = full.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")

    gamma = _resolve("rate", full["medium"]["gamma"], "medium.gamma", RB87_D1_GAMMA, 1.0)
    length = _resolve("length", full["medium"]["length"], "medium.length", gamma, 1.0)
    vals = {}
    for sec, keys in SCHEMA.items():
        vals[sec] = {}
        for k, (kind, _) in keys.items():
            vals[sec][k] = _resolve(kind, full[sec].get(k, ""), f"{sec}.{k}", gamma, length)

    m = vals["medium"]
    try:
        medium = AtomicMedium(gamma=gamma, gamma21=m["gamma21"] * gamma, d_opt=m["d_opt"], length=length)
        controls = ControlFieldSpec(**vals["controls"])
        s = vals["solver"]
        solver = SolverConfig(nz=s["nz"], light_transit=s["light_transit"], phase_mismatch=s["phase_mismatch"],
                              decay_convention=s["decay_convention"])
        Calibration(vals["analysis"]["detector_efficiency"], vals["analysis"]["path_transmission"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sched = vals["schedule"]
    if sched["mode"] not in _MODES:
        raise ConfigError(f"schedule.mode must be one of {_MODES}")
    for k in ("tau_p", "ramp", "bin"):
        v = sched.get(k, vals["analysis"].get(k))
        if not v > 0:
            raise ConfigError(f"{k} must be positive")
    for k in ("tau_lsr", "tau_slp"):
        if sched[k] < 0:
            raise ConfigError(f"schedule.{k} must be >= 0")
    a = vals["analysis"]
    if a["n_cycles"] < 1 or a["n_cycles_reference"] < 0:
        raise ConfigError("analysis.n_cycles must be >= 1")
    if min(a["nbar"], a["background_rate"], a["background_rate_reference"]) < 0:
        raise ConfigError("analysis rates must be >= 0")
    return ExperimentConfig(medium, controls, sched, solver, a, seed, full)


def loads_config(text: str = "", overrides=(), seed: int | None = None) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text) if text else {}
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    doc = apply_overrides(doc, overrides)
    if seed is not None:
        doc["seed"] = seed
    return from_document(doc)


def load_config(paths=(), overrides=(), seed: int | None = None) -> ExperimentConfig:
    """Layer the defaults, each file in ``paths``, then ``overrides`` and ``seed``."""
    doc: dict = {}
    for p in paths or ():
        try:
            layer = tomllib.loads(Path(p).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {p}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {p}: {exc}") from exc
        _check_keys(layer)
        doc = merge(doc, layer)
    doc = apply_overrides(doc, overrides)
    if seed is not None:
        doc["seed"] = seed
    return from_document(doc)


def normalize(doc: dict) -> dict:
    """Full document in canonical units, as written by :func:`serialize`."""
    cfg = from_document(doc)
    out = {}
    for sec, keys in SCHEMA.items():
        out[sec] = {}
        for k, (kind, _) in keys.items():
            raw = cfg.raw[sec].get(k, "")
            if kind == "optional_time" and raw in ("", None):
                continue
            v = _resolve(kind, raw, k, cfg.medium.gamma, cfg.medium.length)
            out[sec][k] = _emit("time" if kind == "optional_time" else kind, v)
    out["seed"] = cfg.seed
    return out


def serialize(cfg: ExperimentConfig) -> str:
    """Canonical TOML text of a resolved configuration."""
    return tomli_w.dumps(normalize(cfg.raw))
