"""Photon-count analysis: ingest, fold, average, subtract, fit.

Event files are CSV with header ``t_ns,cycle_id,atoms,probe_on``.  Lines
starting with ``#`` before the header may carry ``key=value`` metadata,
e.g. ``# n_cycles_atoms=60``.  Timestamps are ns since the sequence
trigger.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import curve_fit

from .errors import AnalysisError, EventFormatError, EventRangeError, FitError
from .schedule import MeasurementTiming

__all__ = [
    "EVENT_HEADER",
    "DEFAULT_CYCLES",
    "CONDITIONS",
    "EventStream",
    "Histogram",
    "ConditionHistograms",
    "FitResult",
    "DecayFit",
    "Calibration",
    "ingest",
    "parse_events",
    "format_events",
    "bin_and_average",
    "subtract_background",
    "gaussian_model",
    "gaussian_fit",
    "efficiency",
    "decay_fit",
    "snr",
    "peak_snr",
    "mean_photon_number",
]

EVENT_HEADER = ("t_ns", "cycle_id", "atoms", "probe_on")
DEFAULT_CYCLES = 60
CONDITIONS = ("probe_atoms", "background_atoms", "probe_reference", "background_reference")


@dataclass
class EventStream:
    """Column-oriented photon events.

    ``metadata`` holds free-form ``key -> str`` pairs read from the file
    header (cycle counts, bin hints).
    """

    t_ns: np.ndarray
    cycle_id: np.ndarray
    atoms: np.ndarray
    probe_on: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t_ns = np.asarray(self.t_ns, dtype=float)
        self.cycle_id = np.asarray(self.cycle_id, dtype=np.int64)
        self.atoms = np.asarray(self.atoms, dtype=bool)
        self.probe_on = np.asarray(self.probe_on, dtype=bool)
        n = self.t_ns.size
        if not (self.cycle_id.size == self.atoms.size == self.probe_on.size == n):
            raise EventFormatError("event columns differ in length")

    def __len__(self):
        return int(self.t_ns.size)

    @classmethod
    def empty(cls, metadata=None) -> "EventStream":
        return cls(np.zeros(0), np.zeros(0, np.int64), np.zeros(0, bool), np.zeros(0, bool), dict(metadata or {}))

    def n_cycles(self, atoms: bool) -> int | None:
        key = "n_cycles_atoms" if atoms else "n_cycles_reference"
        if key in self.metadata:
            return int(self.metadata[key])
        if "n_cycles" in self.metadata:
            return int(self.metadata["n_cycles"])
        return None


def format_events(stream: EventStream) -> str:
    """Serialize a stream, metadata first, in a stable text form."""
    buf = io.StringIO()
    for key in sorted(stream.metadata):
        buf.write(f"# {key}={stream.metadata[key]}\n")
    buf.write(",".join(EVENT_HEADER) + "\n")
    for t, c, a, p in zip(stream.t_ns, stream.cycle_id, stream.atoms, stream.probe_on):
        buf.write(f"{t:.3f},{c},{int(a)},{int(p)}\n")
    return buf.getvalue()


def parse_events(text: str, timing: MeasurementTiming | None = None) -> EventStream:
    """Parse and validate event CSV text; see :func:`ingest`."""
    timing = timing or MeasurementTiming()
    total_ns = timing.total_duration * 1e9
    period_ns = timing.window_period * 1e9
    meta, body = {}, []
    for line in text.splitlines():
        if not body and line.startswith("#"):
            entry = line[1:].strip()
            if "=" in entry:
                k, v = entry.split("=", 1)
                meta[k.strip()] = v.strip()
            continue
        if line.strip() or body:
            body.append(line)
    if not body:
        return EventStream.empty(meta)
    reader = csv.reader(body)
    header = next(reader)
    if tuple(h.strip() for h in header) != EVENT_HEADER:
        raise EventFormatError(f"bad header {header!r}, expected {','.join(EVENT_HEADER)}")

    bad, out_of_range = [], []
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec or all(not f.strip() for f in rec):
            continue
        if len(rec) != 4:
            bad.append(f"line {lineno}: expected 4 fields, got {len(rec)}")
            continue
        try:
            t = float(rec[0])
            cyc = int(rec[1])
            a = int(rec[2])
            p = int(rec[3])
        except ValueError:
            bad.append(f"line {lineno}: non-numeric field in {rec!r}")
            continue
        if a not in (0, 1) or p not in (0, 1):
            bad.append(f"line {lineno}: flags must be 0 or 1")
            continue
        if not math.isfinite(t) or not 0.0 <= t < total_ns:
            out_of_range.append(f"line {lineno}: t_ns={rec[0]} outside [0, {total_ns:.0f})")
            continue
        if cyc < 0:
            bad.append(f"line {lineno}: negative cycle_id")
            continue
        rows.append((t, cyc, a, p, lineno))
    if bad:
        raise EventFormatError(f"{len(bad)} malformed record(s)", bad)
    if out_of_range:
        raise EventRangeError(f"{len(out_of_range)} record(s) out of range", out_of_range)

    arr = np.array([r[:4] for r in rows], dtype=float).reshape(-1, 4)
    lines = np.array([r[4] for r in rows], dtype=np.int64)
    stream = EventStream(arr[:, 0], arr[:, 1].astype(np.int64), arr[:, 2] > 0, arr[:, 3] > 0, meta)

    issues = []
    # monotone within each (cycle, atoms) sequence
    key = stream.cycle_id * 2 + stream.atoms
    for k in np.unique(key):
        sel = np.flatnonzero(key == k)
        drops = np.flatnonzero(np.diff(stream.t_ns[sel]) < 0)
        for d in drops:
            issues.append(f"line {lines[sel[d + 1]]}: timestamp decreases within cycle {k // 2}")
    # probe flag must match the slot type
    slot = np.floor(stream.t_ns / period_ns).astype(np.int64)
    expect = slot < timing.n_probe
    for i in np.flatnonzero(expect != stream.probe_on):
        issues.append(f"line {lines[i]}: probe_on={int(stream.probe_on[i])} in slot {slot[i]}")
    for name in ("n_cycles", "n_cycles_atoms", "n_cycles_reference"):
        if name in meta:
            try:
                n = int(meta[name])
            except ValueError:
                issues.append(f"metadata {name}={meta[name]!r} is not an integer")
                continue
            flag = {"n_cycles_atoms": [True], "n_cycles_reference": [False]}.get(name, [True, False])
            sel = np.isin(stream.atoms, flag)
            if sel.any() and stream.cycle_id[sel].max() >= n:
                issues.append(f"cycle_id {stream.cycle_id[sel].max()} exceeds {name}={n}")
    if issues:
        raise EventFormatError("inconsistent cycle metadata", issues)
    return stream


def ingest(path, timing: MeasurementTiming | None = None) -> EventStream:
    """Read and validate an event file.

    Raises
    ------
    EventFormatError
        Malformed records or inconsistent cycle metadata, with one
        diagnostic per record.
    EventRangeError
        Timestamps outside ``[0, total_duration)``.
    """
    return parse_events(Path(path).read_text(), timing)


@dataclass
class Histogram:
    """Per-slot averaged counts on uniform bins (edges in ns).

    ``raw`` holds summed event counts before averaging; ``None`` after
    subtraction.  ``sigma`` is the 1-sigma uncertainty of ``counts``.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    sigma: np.ndarray
    n_averaged: int
    raw: np.ndarray | None = None
    normalization: float = 1.0
    condition: str = ""

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        widths = np.diff(self.bin_edges)
        if widths.size == 0 or not np.allclose(widths, widths[0], rtol=1e-9, atol=1e-9):
            raise ValueError("bin widths must be uniform")
        if self.counts.shape != widths.shape or self.sigma.shape != widths.shape:
            raise ValueError("counts and sigma must have one entry per bin")

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def total(self, window=None) -> float:
        return float(np.sum(self.counts[self._mask(window)]))

    def _mask(self, window):
        if window is None:
            return np.ones(self.counts.shape, bool)
        lo, hi = window
        c = self.centers
        return (c >= lo) & (c <= hi)

    def scaled(self, factor: float) -> "Histogram":
        """Counts divided by ``factor`` (e.g. a reference fit amplitude)."""
        return Histogram(self.bin_edges, self.counts / factor, self.sigma / abs(factor), self.n_averaged,
                         self.raw, self.normalization * factor, self.condition)

    def shifted(self, dt_ns: float) -> "Histogram":
        return Histogram(self.bin_edges + dt_ns, self.counts, self.sigma, self.n_averaged, self.raw,
                         self.normalization, self.condition)

    def rows(self):
        return np.column_stack([self.centers, self.counts, self.sigma])


class ConditionHistograms(dict):
    """Mapping ``condition -> Histogram``; ``excluded`` counts unbinned events."""

    excluded: int = 0


def _n_cycles_for(stream, atoms, override):
    if isinstance(override, dict):
        v = override.get("atoms" if atoms else "reference")
        if v is not None:
            return int(v)
    elif override is not None:
        return int(override)
    n = stream.n_cycles(atoms)
    return DEFAULT_CYCLES if n is None else n


def bin_and_average(
    stream: EventStream,
    timing: MeasurementTiming | None = None,
    bin_ns: float = 30.0,
    *,
    n_cycles=None,
    span_ns: float | None = None,
) -> ConditionHistograms:
    """Fold events onto one window and average per slot and cycle.

    Events are assigned to a window ``k = floor(t / period)`` and binned in
    ``t - k period`` over ``[0, span_ns)`` (default: the open time, partial
    last bin dropped).  Conditions are probe/background windows crossed
    with atoms/reference sequences.  Counts are divided by
    ``n_averaged = windows x cycles``; ``sigma = sqrt(raw + 1) / n_averaged``.

    Parameters
    ----------
    n_cycles : int, dict or None
        Cycle counts; a dict may give ``atoms`` and ``reference``
        separately.  Falls back to file metadata, then to 60.

    Raises
    ------
    AnalysisError
        If no condition has a usable window.
    """
    timing = timing or MeasurementTiming()
    if not bin_ns > 0:
        raise ValueError("bin_ns must be positive")
    period = timing.window_period * 1e9
    span = timing.window_open * 1e9 if span_ns is None else span_ns
    nbins = int(math.floor(span / bin_ns + 1e-9))
    if nbins < 1:
        raise AnalysisError("bin wider than the analysed span")
    edges = np.arange(nbins + 1) * bin_ns
    slot = np.floor(stream.t_ns / period).astype(np.int64)
    phase = stream.t_ns - slot * period
    kinds = {"probe": slot < timing.n_probe,
             "background": (slot >= timing.n_probe) & (slot < timing.n_probe + timing.n_background)}
    n_windows = {"probe": timing.n_probe, "background": timing.n_background}

    has_reference = bool(np.any(~stream.atoms)) or (stream.n_cycles(False) or 0) > 0 \
        or (isinstance(n_cycles, dict) and n_cycles.get("reference"))
    out = ConditionHistograms()
    binned = 0
    for kind, in_kind in kinds.items():
        for atoms, label in ((True, "atoms"), (False, "reference")):
            if not atoms and not has_reference:
                continue
            cycles = _n_cycles_for(stream, atoms, n_cycles)
            n_avg = n_windows[kind] * cycles
            if n_avg <= 0:
                continue
            sel = in_kind & (stream.atoms == atoms)
            raw, _ = np.histogram(phase[sel], bins=edges)
            binned += int(raw.sum())
            out[f"{kind}_{label}"] = Histogram(edges, raw / n_avg, np.sqrt(raw + 1.0) / n_avg, n_avg,
                                               raw=raw, condition=f"{kind}_{label}")
    if not out:
        raise AnalysisError("no usable slots: every condition has zero windows or cycles")
    out.excluded = len(stream) - binned
    return out


def subtract_background(signal: Histogram, background: Histogram) -> Histogram:
    """Bin-wise difference with uncertainties added in quadrature.

    Raises
    ------
    ValueError
        On differing bin edges or averaging counts.
    """
    if signal.bin_edges.shape != background.bin_edges.shape or not np.allclose(signal.bin_edges, background.bin_edges):
        raise ValueError("binning mismatch between signal and background")
    if signal.n_averaged != background.n_averaged:
        raise ValueError(f"averaging mismatch: {signal.n_averaged} vs {background.n_averaged}")
    return Histogram(signal.bin_edges, signal.counts - background.counts, np.hypot(signal.sigma, background.sigma),
                     signal.n_averaged, None, signal.normalization, f"{signal.condition}-bg")


def gaussian_model(t, amplitude, center, width):
    """``amplitude exp(-4 (t - center)^2 / width^2)``; ``width`` is the 1/e full width."""
    return amplitude * np.exp(-4.0 * (t - center) ** 2 / width**2)


_SQRT_PI_2 = 0.5 * np.sqrt(np.pi)


@dataclass
class FitResult:
    """Least-squares fit output.

    ``params`` and ``errors`` are keyed by name; ``covariance`` follows
    ``names`` order.  For Gaussians ``area`` is in counts (per slot).
    """

    model: str
    names: tuple
    values: np.ndarray
    covariance: np.ndarray
    redchi2: float
    window: tuple | None = None
    bin_width: float = 1.0

    @property
    def params(self) -> dict:
        return dict(zip(self.names, map(float, self.values)))

    @property
    def errors(self) -> dict:
        return dict(zip(self.names, map(float, np.sqrt(np.clip(np.diag(self.covariance), 0.0, None)))))

    @property
    def area(self) -> float:
        if self.model != "gaussian":
            raise AttributeError("area is defined for gaussian fits")
        a, _, w = self.values
        return float(a * w * _SQRT_PI_2 / self.bin_width)

    @property
    def area_error(self) -> float:
        a, _, w = self.values
        grad = np.array([w, 0.0, a]) * _SQRT_PI_2 / self.bin_width
        return float(np.sqrt(max(grad @ self.covariance @ grad, 0.0)))

    def to_dict(self) -> dict:
        d = {"model": self.model, "params": self.params, "errors": self.errors, "redchi2": float(self.redchi2),
             "window_ns": list(self.window) if self.window is not None else None}
        if self.model == "gaussian":
            d.update(area=self.area, area_error=self.area_error)
        return d


def gaussian_fit(hist: Histogram, window=None, *, p0=None) -> FitResult:
    """Weighted Gaussian least squares over the bins inside ``window`` (ns).

    Raises
    ------
    ValueError
        Fewer than five bins in the window.
    FitError
        Non-convergence, or a width below one bin.
    """
    mask = hist._mask(window)
    t, y, s = hist.centers[mask], hist.counts[mask], hist.sigma[mask]
    if t.size < 5:
        raise ValueError(f"need >= 5 bins in the fit window, got {t.size}")
    if p0 is None:
        pos = np.clip(y, 0.0, None)
        if not pos.sum() > 0:
            raise FitError("no positive counts in the fit window")
        c0 = float(np.sum(t * pos) / pos.sum())
        var = float(np.sum((t - c0) ** 2 * pos) / pos.sum())
        w0 = max(2.0 * np.sqrt(2.0 * var), 2.0 * hist.bin_width)
        p0 = (float(y.max()), c0, w0)
    try:
        popt, pcov = curve_fit(gaussian_model, t, y, p0=p0, sigma=s, absolute_sigma=True, maxfev=5000)
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"gaussian fit did not converge: {exc}") from exc
    popt[2] = abs(popt[2])
    if not np.all(np.isfinite(pcov)):
        raise FitError("gaussian fit covariance is undefined")
    if popt[2] < hist.bin_width:
        raise FitError(f"fitted width {popt[2]:.3g} ns collapsed below the bin width")
    resid = (y - gaussian_model(t, *popt)) / s
    dof = max(t.size - 3, 1)
    win = None if window is None else (float(window[0]), float(window[1]))
    return FitResult("gaussian", ("amplitude", "center", "width"), popt, pcov, float(resid @ resid / dof),
                     win, hist.bin_width)


def efficiency(retrieved: FitResult, input: FitResult):
    """Area ratio with relative errors added in quadrature.

    Returns
    -------
    eta, sigma : float
    """
    a_in = input.area
    if not a_in > 0:
        raise ValueError("input pulse area must be positive")
    a_out = retrieved.area
    eta = a_out / a_in
    rel = np.hypot(retrieved.area_error / a_out if a_out else 0.0, input.area_error / a_in)
    return float(eta), float(abs(eta) * rel)


@dataclass
class DecayFit:
    """Exponential storage decay ``eta0 exp(-tau / tau_c)``.

    ``rate_efficiency = 1 / tau_c`` (s^-1); ``rate_amplitude`` is half of
    it, the decay rate of the stored coherence amplitude.  ``*_gamma``
    variants are in units of ``gamma`` when given.
    """

    eta0: float
    tau_c: float
    eta0_err: float
    tau_c_err: float
    redchi2: float
    gamma: float | None = None

    @property
    def rate_efficiency(self) -> float:
        return 1.0 / self.tau_c

    @property
    def rate_efficiency_err(self) -> float:
        return self.tau_c_err / self.tau_c**2

    @property
    def rate_amplitude(self) -> float:
        return 0.5 * self.rate_efficiency

    def in_gamma(self) -> dict:
        if self.gamma is None:
            raise ValueError("no gamma supplied")
        g = self.gamma
        return {"rate_efficiency": self.rate_efficiency / g, "rate_efficiency_err": self.rate_efficiency_err / g,
                "rate_amplitude": self.rate_amplitude / g, "rate_amplitude_err": 0.5 * self.rate_efficiency_err / g}

    def to_dict(self) -> dict:
        d = {"eta0": self.eta0, "eta0_err": self.eta0_err, "tau_c_s": self.tau_c, "tau_c_err_s": self.tau_c_err,
             "rate_efficiency_per_s": self.rate_efficiency, "rate_amplitude_per_s": self.rate_amplitude,
             "redchi2": self.redchi2}
        if self.gamma is not None:
            d.update({f"{k}_gamma": v for k, v in self.in_gamma().items()})
        return d


def decay_fit(etas, gamma: float | None = None) -> DecayFit:
    """Weighted fit of ``eta(tau) = eta0 exp(-tau / tau_c)``.

    Parameters
    ----------
    etas : sequence of (tau, eta, sigma)
        Storage times (s), efficiencies and their 1-sigma errors.
    gamma : float, optional
        Reference rate (rad/s) for reporting in Gamma units.
    """
    arr = np.asarray(etas, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 3:
        raise ValueError("need at least 3 (tau, eta, sigma) points")
    tau, eta, sig = arr.T
    if np.any(eta <= 0):
        raise ValueError("efficiencies must be positive")
    if np.any(sig <= 0):
        raise ValueError("uncertainties must be positive")
    slope, icpt = np.polyfit(tau, np.log(eta), 1, w=eta / sig)
    p0 = (np.exp(icpt), -1.0 / slope if slope < 0 else np.ptp(tau) * 10)

    def model(t, e0, tc):
        return e0 * np.exp(-t / tc)

    try:
        popt, pcov = curve_fit(model, tau, eta, p0=p0, sigma=sig, absolute_sigma=True, maxfev=5000)
    except RuntimeError as exc:
        raise FitError(f"decay fit did not converge: {exc}") from exc
    if not popt[1] > 0:
        raise FitError("fitted decay time is not positive")
    resid = (eta - model(tau, *popt)) / sig
    dof = max(tau.size - 2, 1)
    err = np.sqrt(np.clip(np.diag(pcov), 0.0, None))
    return DecayFit(float(popt[0]), float(popt[1]), float(err[0]), float(err[1]), float(resid @ resid / dof), gamma)


def _window_bins(hist, center_ns, width_ns):
    lo, hi = center_ns - 0.5 * width_ns, center_ns + 0.5 * width_ns
    return (hist.centers >= lo) & (hist.centers <= hi)


def snr(signal: Histogram, background_rate: float, pulse_window: float, center_ns: float | None = None,
        averaging: float = 1.0) -> float:
    """Integrated signal-to-background ratio in a window.

    Background-subtracted counts in the bins whose centers lie within
    ``center +/- pulse_window / 2`` are divided by the expected background
    ``rate x (bins x bin width) x averaging``.  ``averaging`` converts
    per-slot counts to the histogram's scale (1 for averaged histograms).
    The center defaults to the bin-weighted centroid.
    """
    if not pulse_window > 0:
        raise ValueError("pulse_window must be positive")
    if not background_rate > 0:
        raise ValueError("zero background: SNR undefined")
    if center_ns is None:
        pos = np.clip(signal.counts, 0.0, None)
        if not pos.sum() > 0:
            raise AnalysisError("no signal counts")
        center_ns = float(np.sum(signal.centers * pos) / pos.sum())
    mask = _window_bins(signal, center_ns, pulse_window * 1e9)
    if not mask.any():
        raise AnalysisError("window contains no bins")
    live = mask.sum() * signal.bin_width * 1e-9
    return float(signal.counts[mask].sum() / (background_rate * live * averaging))


def peak_snr(signal: Histogram, background_rate: float, averaging: float = 1.0) -> float:
    """Largest bin over the expected background per bin."""
    if not background_rate > 0:
        raise ValueError("zero background: SNR undefined")
    return float(signal.counts.max() / (background_rate * signal.bin_width * 1e-9 * averaging))


@dataclass(frozen=True)
class Calibration:
    """Detection chain between the fiber input and the counter."""

    detector_efficiency: float = 1.0
    path_transmission: float = 1.0

    def __post_init__(self):
        for name in ("detector_efficiency", "path_transmission"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")

    @property
    def product(self) -> float:
        return self.detector_efficiency * self.path_transmission


def mean_photon_number(hist: Histogram, calibration: Calibration = Calibration(), window=None):
    """Photons per pulse: summed per-slot counts over the calibration product.

    Returns
    -------
    nbar, sigma : float
    """
    mask = hist._mask(window)
    k = calibration.product
    return float(hist.counts[mask].sum() / k), float(np.sqrt(np.sum(hist.sigma[mask] ** 2)) / k)
