"""SVG figures written next to the delimited outputs.

Figures are built on :class:`matplotlib.figure.Figure` without pyplot and
saved with a fixed hash salt and no date, so identical data give
identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure

__all__ = ["save_svg", "plot_run", "plot_histograms", "plot_birefringence", "plot_sweep"]

_RC = {"svg.hashsalt": "stoplight", "svg.fonttype": "none", "path.simplify": False, "font.size": 9}


def save_svg(fig: Figure, path) -> Path:
    path = Path(path)
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    return path


def _figure(nrows=1, ncols=1, size=(6.4, 4.0)):
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=size, layout="constrained")
        axes = fig.subplots(nrows, ncols, squeeze=False)
    return fig, axes


def plot_run(result, path, title: str = "") -> Path:
    """Input and output fluxes plus control envelopes against time (ns)."""
    fig, ax = _figure(2, 1, (6.4, 5.0))
    t = result.t * 1e9
    norm = result.flux_in.max() or 1.0
    a = ax[0, 0]
    a.plot(t, result.flux_in / norm, color="0.5", label="input")
    a.plot(t, result.flux_fwd / norm, color="C3", label="forward")
    if np.any(result.flux_bwd > 0):
        a.plot(t, result.flux_bwd / norm, color="C0", label="backward")
    a.set_ylabel("flux / input peak")
    a.legend(loc="upper right")
    if title:
        a.set_title(title)
    b = ax[1, 0]
    b.plot(t, result.omega_plus, color="C2", label="control +")
    b.plot(t, result.omega_minus, color="C1", label="control -")
    b.set_xlabel("t (ns)")
    b.set_ylabel("Rabi frequency (Gamma)")
    b.legend(loc="upper right")
    return save_svg(fig, path)


def plot_histograms(curves, path, fits=None, ylabel="counts per slot") -> Path:
    """Step histograms with error bars and optional Gaussian fits.

    ``curves`` maps a label to a Histogram; ``fits`` maps the same labels
    to FitResult objects.
    """
    from .counts import gaussian_model

    fig, ax = _figure()
    a = ax[0, 0]
    for i, (label, h) in enumerate(curves.items()):
        color = f"C{i}"
        a.errorbar(h.centers, h.counts, yerr=h.sigma, fmt="o", ms=2.5, color=color, label=label)
        fit = (fits or {}).get(label)
        if fit is not None:
            tt = np.linspace(h.bin_edges[0], h.bin_edges[-1], 600)
            a.plot(tt, gaussian_model(tt, *fit.values), color=color, lw=1.0)
    a.set_xlabel("t (ns)")
    a.set_ylabel(ylabel)
    a.legend(loc="upper right")
    return save_svg(fig, path)


def plot_birefringence(theta, dop, theta_out, model_theta, model_dop, model_out, path) -> Path:
    """Measured DOP and output orientation with fitted model curves (degrees)."""
    fig, ax = _figure(2, 1, (6.4, 5.0))
    deg = np.degrees
    a, b = ax[0, 0], ax[1, 0]
    a.plot(deg(theta), dop, "o", ms=3, color="C0")
    a.plot(deg(model_theta), model_dop, color="k", lw=1.0)
    a.set_ylabel("DOP")
    ok = np.isfinite(theta_out)
    b.plot(deg(np.asarray(theta)[ok]), deg(np.asarray(theta_out)[ok]), "o", ms=3, color="C3")
    b.plot(deg(model_theta), deg(model_out), color="k", lw=1.0)
    b.set_xlabel("input angle (deg)")
    b.set_ylabel("output angle (deg)")
    return save_svg(fig, path)


def plot_sweep(x, columns: dict, path, xlabel="ratio") -> Path:
    fig, ax = _figure()
    a = ax[0, 0]
    for i, (label, y) in enumerate(columns.items()):
        a.plot(x, y, "o-", ms=3, color=f"C{i}", label=label)
    a.set_xlabel(xlabel)
    a.legend(loc="best")
    return save_svg(fig, path)
