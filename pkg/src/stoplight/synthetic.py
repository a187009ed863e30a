"""Synthetic photon-count streams from simulated flux traces."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .counts import DEFAULT_CYCLES, EventStream, format_events
from .schedule import MeasurementTiming

__all__ = ["SyntheticRunSpec", "generate_events", "write_events", "make_rng"]


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by ``seed`` alone."""
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


@dataclass
class SyntheticRunSpec:
    """Detection model for one measurement.

    ``signal`` and ``reference`` are flux traces (any units) sampled on
    ``t`` (s, relative to the window opening plus ``t_offset``).  Both are
    scaled by ``nbar / input_area`` so that ``nbar`` photons enter per
    pulse; ``input_area`` defaults to the reference area.  Detected means
    are further multiplied by ``detection_efficiency``.

    Atoms sequences use ``signal`` in every probe window; reference
    sequences (only when ``n_cycles_reference > 0``) use ``reference``.
    Background arrives uniformly over the whole recorded sequence.
    """

    t: np.ndarray
    signal: np.ndarray
    nbar: float
    background_rate: float = 0.0
    n_cycles: int = DEFAULT_CYCLES
    timing: MeasurementTiming = field(default_factory=MeasurementTiming)
    seed: int = 0
    reference: np.ndarray | None = None
    n_cycles_reference: int = 0
    background_rate_reference: float | None = None
    input_area: float | None = None
    detection_efficiency: float = 1.0
    t_offset: float = 0.0

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.signal = np.asarray(self.signal, dtype=float)
        if self.reference is not None:
            self.reference = np.asarray(self.reference, dtype=float)
        if self.t.ndim != 1 or self.t.size < 2 or np.any(np.diff(self.t) <= 0):
            raise ValueError("t must be strictly increasing with >= 2 samples")
        for name in ("signal", "reference"):
            a = getattr(self, name)
            if a is not None and (a.shape != self.t.shape or np.any(a < 0) or not np.all(np.isfinite(a))):
                raise ValueError(f"{name} must be a finite, non-negative trace on t")
        rates = [self.nbar, self.background_rate, self.background_rate_reference or 0.0]
        if min(rates) < 0:
            raise ValueError("rates must be >= 0")
        if self.n_cycles < 1 or self.n_cycles_reference < 0:
            raise ValueError("n_cycles must be >= 1")
        if self.n_cycles_reference and self.reference is None:
            raise ValueError("reference cycles need a reference trace")
        if not 0 < self.detection_efficiency <= 1:
            raise ValueError("detection_efficiency must lie in (0, 1]")
        lo, hi = self.t_offset + self.t[0], self.t_offset + self.t[-1]
        if lo < 0 or hi > self.timing.window_period:
            raise ValueError("trace does not fit inside one window")

    @classmethod
    def from_run(cls, result, nbar: float, **kw) -> "SyntheticRunSpec":
        """Spec from a solver run: forward output with atoms, input as reference."""
        kw.setdefault("input_area", float(trapezoid(result.flux_in, result.t)))
        kw.setdefault("reference", result.flux_in)
        return cls(result.t, result.flux_fwd, nbar, **kw)

    def scale(self) -> float:
        area = self.input_area
        if area is None:
            trace = self.reference if self.reference is not None else self.signal
            area = float(trapezoid(trace, self.t))
        if self.nbar == 0:
            return 0.0
        if not area > 0:
            raise ValueError("input trace has zero area")
        return self.nbar * self.detection_efficiency / area

    def expected_signal(self, reference: bool = False) -> float:
        """Mean detected signal photons per probe window."""
        trace = self.reference if reference else self.signal
        return self.scale() * float(trapezoid(trace, self.t))


def _sample_trace(rng, t, f, n):
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))])
    u = rng.random(n) * cdf[-1]
    k = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, t.size - 2)
    # invert the trapezoid exactly on each segment
    f0, f1, dtk = f[k], f[k + 1], t[k + 1] - t[k]
    r = u - cdf[k]
    slope = (f1 - f0) / dtk
    with np.errstate(invalid="ignore", divide="ignore"):
        quad = (-f0 + np.sqrt(np.maximum(f0 * f0 + 2 * slope * r, 0.0))) / slope
    lin = np.where(f0 > 0, r / np.where(f0 > 0, f0, 1.0), 0.5 * dtk)
    x = np.where(np.abs(slope) * dtk > 1e-12 * np.maximum(f0, 1e-300), quad, lin)
    return t[k] + np.clip(np.nan_to_num(x), 0.0, dtk)


def _sequence(rng, spec, trace, bg_rate, n_cycles, atoms):
    timing = spec.timing
    period, total = timing.window_period, timing.total_duration
    mean = spec.scale() * float(trapezoid(trace, spec.t)) if trace is not None else 0.0
    out_t, out_c = [], []
    for cyc in range(n_cycles):
        parts = []
        if mean > 0:
            k = rng.poisson(mean, size=timing.n_probe)
            n = int(k.sum())
            slots = np.repeat(np.arange(timing.n_probe), k)
            parts.append(slots * period + spec.t_offset + _sample_trace(rng, spec.t, trace, n))
        if bg_rate > 0:
            nb = rng.poisson(bg_rate * total)
            parts.append(rng.random(nb) * total)
        if parts:
            ts = np.sort(np.concatenate(parts))
            out_t.append(ts)
            out_c.append(np.full(ts.size, cyc, dtype=np.int64))
    if not out_t:
        return np.zeros(0), np.zeros(0, np.int64), np.zeros(0, bool)
    t_s = np.concatenate(out_t)
    return t_s, np.concatenate(out_c), np.full(t_s.size, atoms)


def generate_events(spec: SyntheticRunSpec) -> EventStream:
    """Inhomogeneous-Poisson detection events for ``spec``.

    Timestamps are rounded to 1 ps so that the text form round-trips.
    Events are ordered by atoms flag (atoms first), cycle, then time.
    """
    rng = make_rng(spec.seed)
    bg_ref = spec.background_rate if spec.background_rate_reference is None else spec.background_rate_reference
    seqs = [_sequence(rng, spec, spec.signal, spec.background_rate, spec.n_cycles, True)]
    if spec.n_cycles_reference:
        seqs.append(_sequence(rng, spec, spec.reference, bg_ref, spec.n_cycles_reference, False))
    t_s = np.concatenate([s[0] for s in seqs])
    t_ns = np.round(t_s * 1e9, 3)
    total_ns = spec.timing.total_duration * 1e9
    t_ns = np.minimum(t_ns, total_ns - 1e-3)
    cyc = np.concatenate([s[1] for s in seqs])
    atoms = np.concatenate([s[2] for s in seqs])
    slot = np.floor(t_ns / (spec.timing.window_period * 1e9)).astype(np.int64)
    meta = {"n_cycles_atoms": spec.n_cycles, "n_cycles_reference": spec.n_cycles_reference, "seed": spec.seed}
    return EventStream(t_ns, cyc, atoms, slot < spec.timing.n_probe, meta)


def write_events(stream: EventStream, path) -> Path:
    path = Path(path)
    path.write_text(format_events(stream))
    return path
