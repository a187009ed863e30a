"""Probe and control waveforms, and the measurement-window timing skeleton.

Times are seconds.  Control envelopes are Rabi frequencies in Gamma units;
probe envelopes are intensities (flux units, arbitrary scale).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .errors import ScheduleError

__all__ = [
    "SHAPES",
    "DEFAULT_RAMP",
    "Segment",
    "Envelope",
    "ControlSchedule",
    "SlpOffsets",
    "MeasurementTiming",
    "smoothstep",
    "gaussian_probe",
    "constant_envelope",
    "lsr_schedule",
    "slp_schedule",
    "slow_light_schedule",
    "measurement_timing",
    "schedule_table",
]

SHAPES = ("constant", "linear", "smoothstep", "gaussian")
DEFAULT_RAMP = 30e-9

_REQUIRED = {
    "constant": ("value",),
    "linear": ("start", "end"),
    "smoothstep": ("start", "end"),
    "gaussian": ("peak", "center", "width"),
}


def smoothstep(x):
    """C1 step ``3x^2 - 2x^3`` on [0, 1], clamped outside."""
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


@dataclass(frozen=True)
class Segment:
    """One piece of an envelope on ``[t_start, t_end)``.

    ``params`` keys by shape: constant ``value``; linear and smoothstep
    ``start, end``; gaussian ``peak, center, width`` where ``width`` is the
    full width at 1/e of the peak value.
    """

    t_start: float
    t_end: float
    shape: str
    params: dict

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ScheduleError(f"unknown segment shape {self.shape!r}")
        missing = [k for k in _REQUIRED[self.shape] if k not in self.params]
        if missing:
            raise ScheduleError(f"{self.shape} segment missing {missing}")
        if not self.t_end > self.t_start:
            raise ScheduleError(f"segment end {self.t_end} must follow start {self.t_start}")
        p = self.params
        levels = [p[k] for k in ("value", "start", "end", "peak") if k in p]
        if any(v < 0 for v in levels):
            raise ScheduleError("envelope values must be >= 0")
        if self.shape == "gaussian" and not p["width"] > 0:
            raise ScheduleError("gaussian width must be positive")

    def evaluate(self, t):
        p = self.params
        if self.shape == "constant":
            return np.full(np.shape(t), float(p["value"]))
        if self.shape == "gaussian":
            return p["peak"] * np.exp(-((2.0 * (t - p["center"]) / p["width"]) ** 2))
        x = (t - self.t_start) / (self.t_end - self.t_start)
        x = smoothstep(x) if self.shape == "smoothstep" else np.clip(x, 0.0, 1.0)
        return p["start"] + (p["end"] - p["start"]) * x

    def to_dict(self) -> dict:
        return {"t_start": self.t_start, "t_end": self.t_end, "shape": self.shape, "params": dict(self.params)}


class Envelope:
    """Piecewise waveform over contiguous segments.

    Outside the covered interval the first and last segments are
    extended: ramps clamp to their end levels and a Gaussian keeps its
    formula, so the envelope is evaluable at any time.
    """

    def __init__(self, segments: Iterable[Segment]):
        segs = [s if isinstance(s, Segment) else Segment(**s) for s in segments]
        if not segs:
            raise ScheduleError("an envelope needs at least one segment")
        for a, b in zip(segs, segs[1:]):
            if a.t_end != b.t_start:
                raise ScheduleError(f"segments not contiguous at {a.t_end} / {b.t_start}")
        self.segments = tuple(segs)
        self._starts = np.array([s.t_start for s in segs])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self._starts, t, side="right") - 1, 0, len(self.segments) - 1)
        out = np.empty(t.shape)
        for k, seg in enumerate(self.segments):
            mask = idx == k
            if np.any(mask):
                out[mask] = seg.evaluate(t[mask])
        return out if out.ndim else float(out)

    def __eq__(self, other):
        return isinstance(other, Envelope) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return f"Envelope({len(self.segments)} segments, {self.t_start:.3e}..{self.t_end:.3e} s)"

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    @property
    def breakpoints(self) -> np.ndarray:
        return np.append(self._starts, self.t_end)

    def peak_time(self) -> float | None:
        """Center of the first Gaussian segment, if any."""
        for seg in self.segments:
            if seg.shape == "gaussian":
                return float(seg.params["center"])
        return None

    def max_jump(self) -> float:
        """Largest value discontinuity across internal breakpoints."""
        jumps = [abs(a.evaluate(np.array(a.t_end)) - b.evaluate(np.array(b.t_start)))
                 for a, b in zip(self.segments, self.segments[1:])]
        return float(max(jumps, default=0.0))

    def to_dict(self) -> list:
        return [s.to_dict() for s in self.segments]

    @classmethod
    def from_dict(cls, data: list) -> "Envelope":
        return cls(Segment(**d) for d in data)


def constant_envelope(value: float, t_start: float = 0.0, t_end: float = 1e-6) -> Envelope:
    return Envelope([Segment(t_start, t_end, "constant", {"value": float(value)})])


def _pieces(t0, pieces):
    """Build contiguous segments from ``(duration, shape, params)`` tuples."""
    out, t = [], t0
    for dur, shape, params in pieces:
        if dur <= 0:
            continue
        out.append(Segment(t, t + dur, shape, params))
        t += dur
    return out


@dataclass
class ControlSchedule:
    """Probe and control waveforms with their detunings (Gamma units).

    ``events`` records named switching times (s).  When both
    ``switch_off`` and a Gaussian probe are present the probe peak must
    precede the switch-off.
    """

    control_fwd: Envelope
    control_bwd: Envelope
    probe: Envelope | None = None
    detuning_probe: float = 0.0
    detuning_plus: float = 0.0
    detuning_minus: float = 0.0
    tau_p: float | None = None
    tau_lsr: float | None = None
    tau_slp: float | None = None
    dt_slp: float | None = None
    events: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.probe is not None and "switch_off" in self.events:
            peak = self.probe.peak_time()
            if peak is not None and peak >= self.events["switch_off"]:
                raise ScheduleError("probe peak must precede the control switch-off")

    def with_probe(self, probe: Envelope, tau_p: float | None = None, detuning_probe: float | None = None):
        d = dict(self.__dict__)
        d.update(probe=probe, tau_p=tau_p if tau_p is not None else self.tau_p)
        if detuning_probe is not None:
            d["detuning_probe"] = detuning_probe
        return ControlSchedule(**d)

    def evaluate(self, t):
        """``(probe, omega_plus, omega_minus)`` at times ``t``."""
        t = np.asarray(t, dtype=float)
        probe = self.probe(t) if self.probe is not None else np.zeros(t.shape)
        return probe, self.control_fwd(t), self.control_bwd(t)

    def to_dict(self) -> dict:
        return {
            "probe": self.probe.to_dict() if self.probe is not None else None,
            "control_fwd": self.control_fwd.to_dict(),
            "control_bwd": self.control_bwd.to_dict(),
            "detuning_probe": self.detuning_probe,
            "detuning_plus": self.detuning_plus,
            "detuning_minus": self.detuning_minus,
            "tau_p": self.tau_p,
            "tau_lsr": self.tau_lsr,
            "tau_slp": self.tau_slp,
            "dt_slp": self.dt_slp,
            "events": dict(self.events),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ControlSchedule":
        d = dict(data)
        for key in ("control_fwd", "control_bwd"):
            d[key] = Envelope.from_dict(d[key])
        d["probe"] = Envelope.from_dict(d["probe"]) if d.get("probe") else None
        return cls(**d)


def gaussian_probe(tau_p: float, t0: float, peak: float = 1.0, span: float = 4.0) -> Envelope:
    """Gaussian intensity ``peak exp(-(2(t - t0)/tau_p)^2)``.

    ``tau_p`` is the full width at 1/e of the peak intensity.  The
    segment covers ``t0 +/- span * tau_p``.
    """
    if not tau_p > 0:
        raise ScheduleError("tau_p must be positive")
    if peak < 0:
        raise ScheduleError("peak must be >= 0")
    return Envelope([Segment(t0 - span * tau_p, t0 + span * tau_p, "gaussian",
                             {"peak": float(peak), "center": float(t0), "width": float(tau_p)})])


def slow_light_schedule(omega: float, t_start: float = 0.0, t_end: float = 1e-6) -> ControlSchedule:
    """Constant forward control, no backward control."""
    return ControlSchedule(constant_envelope(omega, t_start, t_end), constant_envelope(0.0, t_start, t_end))


def lsr_schedule(
    omega_on: float,
    tau_lsr: float,
    ramp: float = DEFAULT_RAMP,
    *,
    t_switch: float,
    t_start: float = 0.0,
    tail: float = 1e-6,
) -> ControlSchedule:
    """Storage-and-retrieval control waveform.

    The forward control is ``omega_on`` until ``t_switch``, ramps to zero
    over ``ramp``, stays off for ``tau_lsr``, ramps back up and stays on
    for ``tail``.  The backward control is identically zero.

    Raises
    ------
    ScheduleError
        Non-positive ramp, negative hold, or a ramp that does not fit
        between ``t_start`` and ``t_switch``.
    """
    if not ramp > 0:
        raise ScheduleError("ramp must be positive")
    if tau_lsr < 0:
        raise ScheduleError("tau_lsr must be >= 0")
    if omega_on < 0:
        raise ScheduleError("omega_on must be >= 0")
    if t_switch - t_start < ramp:
        raise ScheduleError(f"ramp {ramp:.3g} s longer than the on period before switch-off")
    w = float(omega_on)
    fwd = _pieces(t_start, [
        (t_switch - t_start, "constant", {"value": w}),
        (ramp, "smoothstep", {"start": w, "end": 0.0}),
        (tau_lsr, "constant", {"value": 0.0}),
        (ramp, "smoothstep", {"start": 0.0, "end": w}),
        (tail, "constant", {"value": w}),
    ])
    t_end = fwd[-1].t_end
    events = {
        "switch_off": t_switch,
        "off": t_switch + ramp,
        "switch_on": t_switch + ramp + tau_lsr,
        "on": t_switch + 2 * ramp + tau_lsr,
    }
    return ControlSchedule(Envelope(fwd), constant_envelope(0.0, t_start, t_end),
                           tau_lsr=tau_lsr, events=events)


@dataclass(frozen=True)
class SlpOffsets:
    """Timing of the stationary-light window.

    Attributes
    ----------
    t_on : float
        Start of the backward-control ramp-up (s).
    ramp : float
        Ramp duration of both controls (s).
    shift : float
        Extra offset added to both control edges (s), e.g. -115 ns.
    """

    t_on: float
    ramp: float = DEFAULT_RAMP
    shift: float = 0.0


def slp_schedule(
    omega0: float,
    omega_minus_level: float,
    tau_slp: float,
    offsets: SlpOffsets,
    *,
    t_start: float = 0.0,
    tail: float = 1e-6,
) -> ControlSchedule:
    """Stationary-light waveform at constant ``Omega0^2``.

    During the plateau of length ``tau_slp`` the backward control sits at
    ``omega_minus_level`` and the forward control at
    ``sqrt(omega0^2 - level^2)``.  Outside, ``omega_plus = omega0`` and
    ``omega_minus = 0``.  Both controls use smoothstep ramps.
    """
    if omega_minus_level < 0 or omega0 < 0:
        raise ScheduleError("Rabi frequencies must be >= 0")
    if omega_minus_level > omega0:
        raise ScheduleError(f"backward level {omega_minus_level} exceeds omega0 {omega0}: Omega0^2 cannot be kept constant")
    if tau_slp < 0:
        raise ScheduleError("tau_slp must be >= 0")
    ramp = offsets.ramp
    if not ramp > 0:
        raise ScheduleError("ramp must be positive")
    t_on = offsets.t_on + offsets.shift
    if t_on - t_start < 0:
        raise ScheduleError("stationary window starts before the schedule")
    w0, wm = float(omega0), float(omega_minus_level)
    wp = float(np.sqrt(max(w0 * w0 - wm * wm, 0.0)))
    lead = t_on - t_start
    fwd = _pieces(t_start, [
        (lead, "constant", {"value": w0}),
        (ramp, "smoothstep", {"start": w0, "end": wp}),
        (tau_slp, "constant", {"value": wp}),
        (ramp, "smoothstep", {"start": wp, "end": w0}),
        (tail, "constant", {"value": w0}),
    ])
    bwd = _pieces(t_start, [
        (lead, "constant", {"value": 0.0}),
        (ramp, "smoothstep", {"start": 0.0, "end": wm}),
        (tau_slp, "constant", {"value": wm}),
        (ramp, "smoothstep", {"start": wm, "end": 0.0}),
        (tail, "constant", {"value": 0.0}),
    ])
    events = {
        "slp_ramp_on": t_on,
        "slp_start": t_on + ramp,
        "slp_end": t_on + ramp + tau_slp,
        "slp_ramp_off": t_on + 2 * ramp + tau_slp,
    }
    return ControlSchedule(Envelope(fwd), Envelope(bwd), tau_slp=tau_slp,
                           dt_slp=tau_slp + ramp, events=events)


@dataclass(frozen=True)
class MeasurementTiming:
    """Window structure of one measurement sequence.

    ``n_prep`` preparation windows run before the trigger at negative
    times.  The recorded sequence ``[0, n_windows * window_period)``
    holds ``n_probe`` probe windows followed by ``n_background``
    background windows.
    """

    window_period: float = 4e-6
    window_open: float = 2.5e-6
    n_windows: int = 50
    n_prep: int = 4
    n_probe: int = 25
    n_background: int = 25

    def __post_init__(self):
        if not (0 < self.window_open <= self.window_period):
            raise ScheduleError("window_open must lie in (0, window_period]")
        if min(self.n_windows, self.n_probe, self.n_background, self.n_prep) < 0:
            raise ScheduleError("window counts must be >= 0")
        if self.n_probe + self.n_background > self.n_windows:
            raise ScheduleError("probe + background windows exceed the recorded windows")

    @property
    def frequency(self) -> float:
        return 1.0 / self.window_period

    @property
    def total_duration(self) -> float:
        return self.n_windows * self.window_period

    def slot_edges(self) -> np.ndarray:
        """Boundaries of the recorded windows, tiling ``[0, total_duration]``."""
        return np.arange(self.n_windows + 1) * self.window_period

    def prep_edges(self) -> np.ndarray:
        return (np.arange(self.n_prep + 1) - self.n_prep) * self.window_period

    def slot_kind(self, k: int) -> str:
        if not 0 <= k < self.n_windows:
            raise IndexError(k)
        if k < self.n_probe:
            return "probe"
        if k < self.n_probe + self.n_background:
            return "background"
        return "idle"

    def slot_kinds(self) -> list:
        return [self.slot_kind(k) for k in range(self.n_windows)]

    def to_dict(self) -> dict:
        return asdict(self)


def measurement_timing(**overrides) -> MeasurementTiming:
    """Canonical 250 kHz, 50-window sequence (200 us)."""
    return MeasurementTiming(**overrides)


def schedule_table(schedule: ControlSchedule, t) -> np.ndarray:
    """Rows ``(t_ns, probe, omega_plus, omega_minus)`` for export."""
    t = np.asarray(t, dtype=float)
    probe, wp, wm = schedule.evaluate(t)
    return np.column_stack([t * 1e9, probe, wp, wm])
