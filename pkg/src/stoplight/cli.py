"""Command-line interface.

Exit codes: 0 success, 2 configuration or input error, 3 solver failure,
4 fit failure or ambiguity, 5 analysis failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMA, ExperimentConfig, load_config, normalize, parse_quantity
from .counts import (
    bin_and_average,
    efficiency,
    gaussian_fit,
    ingest,
    mean_photon_number,
    peak_snr,
    snr,
    subtract_background,
)
from .eit import group_delay, transmission_spectrum
from .errors import AnalysisError, ConfigError, EventFormatError, FitError, SolverError, StoplightError
from .jones import (
    DopMeasurement,
    PolarizerScan,
    analyze_polarizer_scan,
    beat_length,
    degree_of_polarization,
    fit_birefringence,
    fit_residuals,
    output_orientation,
)
from .plotting import plot_birefringence, plot_histograms, plot_run, plot_sweep
from .schedule import schedule_table
from .solver import level_for_ratio, run_lsr, run_slow_light, run_slp, slow_light_delay
from .synthetic import SyntheticRunSpec, generate_events, write_events

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_CONFIG", "EXIT_SOLVER", "EXIT_FIT", "EXIT_ANALYSIS"]

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_FIT, EXIT_ANALYSIS = 0, 2, 3, 4, 5
ENV_OUT = "STOPLIGHT_OUT"
DEFAULT_OUT = "stoplight-out"
RUN_COLUMNS = ("t_ns", "flux_fwd", "flux_bwd", "omega_plus", "omega_minus")
SLP_SNAPSHOTS = 7


# --------------------------------------------------------------------------
# output helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def write_table(path: Path, columns, data, fmt: str) -> Path:
    """Write columns as CSV (``path.csv``) or JSON records (``path.json``)."""
    data = np.asarray(data, dtype=float).reshape(-1, len(columns))
    if fmt == "json":
        out = path.with_suffix(".json")
        write_json(out, {"columns": list(columns), "rows": data})
        return out
    out = path.with_suffix(".csv")
    lines = [",".join(columns)]
    lines += [",".join(f"{v:.12g}" for v in row) for row in data]
    out.write_text("\n".join(lines) + "\n")
    return out


def read_table(path) -> dict:
    """Read a CSV or JSON table written by :func:`write_table`."""
    path = Path(path)
    if path.suffix == ".json":
        d = json.loads(path.read_text())
        rows = np.asarray(d["rows"], dtype=float).reshape(-1, len(d["columns"]))
        return {c: rows[:, i] for i, c in enumerate(d["columns"])}
    text = path.read_text().splitlines()
    header = [h.strip() for h in text[0].split(",")]
    rows = np.array([[float(x) for x in ln.split(",")] for ln in text[1:] if ln.strip()], dtype=float)
    rows = rows.reshape(-1, len(header))
    return {c: rows[:, i] for i, c in enumerate(header)}


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(ENV_OUT) or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> ExperimentConfig:
    return load_config(args.config or (), args.set or (), args.seed)


def _document(cfg: ExperimentConfig) -> dict:
    return normalize(cfg.raw)


# --------------------------------------------------------------------------
# simulate


def run_mode(cfg: ExperimentConfig, n_snapshots: int = SLP_SNAPSHOTS):
    """Run the configured scenario; returns ``(result, summary)``."""
    s, c, med = cfg.schedule, cfg.controls, cfg.medium
    common = dict(tau_p=s["tau_p"], t_probe=s["t_probe"], t_end=s["t_end"], probe_peak=s["probe_peak"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if cfg.mode == "slow-light":
            res = run_slow_light(cfg.solver, med, c.rabi_plus, detuning_probe=c.detuning_probe, **common)
            a_in = res.area("flux_in")
            summary = {"transmission": res.area("flux_fwd") / a_in, "delay_s": slow_light_delay(res),
                       "eit_delay_s": group_delay(c.rabi_plus**2, med) if c.rabi_plus > 0 else None,
                       "transit_s": cfg.solver.light_transit / med.gamma}
            retrieval_after = 0.0
        elif cfg.mode == "lsr":
            res, eta = run_lsr(cfg.solver, med, s["tau_lsr"], rabi=c.rabi_plus, ramp=s["ramp"],
                               t_switch=s["t_switch"], **common)
            summary = {k: res.info[k] for k in ("eta", "leakage", "leakage_fwd", "leakage_bwd", "stored",
                                                "residual")}
            retrieval_after = res.info["events"]["switch_on"]
        else:
            res, eta, leak = run_slp(cfg.solver, med, s["tau_slp"], c.rabi_minus, omega0=c.rabi_plus,
                                     detuning_minus=c.detuning_minus, ramp=s["ramp"], t_on=s["t_switch"],
                                     n_snapshots=n_snapshots, **common)
            summary = {k: res.info[k] for k in ("eta", "leakage", "ratio", "omega_plus_slp", "drift_velocity",
                                                "retrieval_centroid")}
            retrieval_after = res.info["events"]["slp_ramp_off"]
    summary.update(mode=cfg.mode, retrieval_after_s=retrieval_after,
                   events=res.info.get("events", {}), grid={k: res.info[k] for k in ("nz", "nt", "dt")},
                   warnings=sorted({str(w.message) for w in caught}))
    return res, summary


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if args.mode:
        cfg = cfg.with_value("schedule.mode", args.mode)
    out = _out_dir(args)
    res, summary = run_mode(cfg)
    cols = np.column_stack([res.t * 1e9, res.flux_fwd, res.flux_bwd, res.omega_plus, res.omega_minus])
    write_table(out / "run", RUN_COLUMNS, cols, args.format)
    write_table(out / "input", ("t_ns", "flux_in"), np.column_stack([res.t * 1e9, res.flux_in]), args.format)
    for k, snap in enumerate(res.snapshots):
        write_table(out / f"snapshot_{k:02d}", ("z_m", "probe_fwd_abs2", "probe_bwd_abs2", "spin_abs2"),
                    np.column_stack([snap.z, snap.probe_fwd_abs2, snap.probe_bwd_abs2, snap.spin_abs2]),
                    args.format)
    grid = np.linspace(-10.0, 10.0, 801)
    write_table(out / "spectrum", ("delta_over_gamma", "transmission"),
                np.column_stack([grid, transmission_spectrum(cfg.medium, cfg.controls, grid)]), args.format)
    sched = res.info.get("schedule")
    if sched is not None:
        tab = schedule_table(sched, res.t[:: max(1, res.t.size // 2000)])
        write_table(out / "schedule", ("t_ns", "probe", "omega_plus", "omega_minus"), tab, args.format)
    summary["snapshot_times_s"] = [s.t for s in res.snapshots]
    summary["config"] = _document(cfg)
    write_json(out / "summary.json", summary)
    plot_run(res, out / "run.svg", title=cfg.mode)
    print(json.dumps(_jsonable({k: summary.get(k) for k in ("mode", "eta", "leakage", "transmission")}),
                     sort_keys=True))
    return EXIT_OK


# --------------------------------------------------------------------------
# fit-birefringence


DOP_HEADER = ("theta_deg", "dop", "dop_err", "theta_out_deg", "theta_out_err")
SCAN_HEADER = ("theta_in_deg", "analyzer_deg", "power_norm")


def _csv_records(path):
    try:
        lines = Path(path).read_text().splitlines()
    except FileNotFoundError as exc:
        raise ConfigError(f"data file not found: {path}") from exc
    body = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    if not body:
        raise ConfigError("empty data file")
    header = tuple(h.strip() for h in body[0].split(","))
    rows = []
    for n, ln in enumerate(body[1:], start=2):
        f = [x.strip() for x in ln.split(",")]
        if len(f) != len(header):
            raise ConfigError(f"line {n}: expected {len(header)} fields, got {len(f)}")
        rows.append((n, dict(zip(header, f))))
    return header, rows


def _num(rec, key, n, default=None):
    v = rec.get(key, "")
    if v == "":
        if default is None:
            raise ConfigError(f"line {n}: missing {key}")
        return default
    try:
        return float(v)
    except ValueError as exc:
        raise ConfigError(f"line {n}: {key}={v!r} is not a number") from exc


def read_dop_file(path) -> list:
    """Measurements from a DOP table or from raw polarizer scans.

    DOP tables have columns ``theta_deg,dop,dop_err,theta_out_deg,theta_out_err``
    (angles in degrees; blank orientation fields mean no orientation
    data).  Scan files have ``theta_in_deg,analyzer_deg,power_norm`` and
    are reduced per input angle with :func:`analyze_polarizer_scan`.
    """
    header, rows = _csv_records(path)
    if set(header) == set(SCAN_HEADER):
        groups: dict = {}
        for n, rec in rows:
            groups.setdefault(_num(rec, "theta_in_deg", n), []).append(
                (_num(rec, "analyzer_deg", n), _num(rec, "power_norm", n)))
        out = []
        for th, pts in sorted(groups.items()):
            arr = np.array(pts)
            try:
                scan = PolarizerScan(math.radians(th), np.radians(arr[:, 0]), arr[:, 1])
            except ValueError as exc:
                raise ConfigError(f"scan at {th} deg: {exc}") from exc
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                out.append(analyze_polarizer_scan(scan))
        return out
    if not set(header) <= set(DOP_HEADER) or header[:2] != DOP_HEADER[:2]:
        raise ConfigError(f"bad header {','.join(header)!r}; expected {','.join(DOP_HEADER)}")
    out = []
    for n, rec in rows:
        dop = _num(rec, "dop", n)
        if not 0.0 <= dop <= 1.0:
            raise ConfigError(f"line {n}: dop outside [0, 1]")
        out.append(DopMeasurement(
            math.radians(_num(rec, "theta_deg", n)), dop,
            math.radians(_num(rec, "theta_out_deg", n, float("nan"))),
            _num(rec, "dop_err", n, 0.0), math.radians(_num(rec, "theta_out_err", n, 0.0)),
        ))
    return out


def cmd_fit_birefringence(args) -> int:
    data = read_dop_file(args.data)
    length = parse_quantity(args.fiber_length, "length")
    params, cov = fit_birefringence(data, args.phi_seed, fiber_length=length)
    err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    res = fit_residuals(params, data)
    out = _out_dir(args)
    th = np.radians(np.linspace(-90.0, 90.0, 361))
    dop = degree_of_polarization(params, th)
    tout = output_orientation(params, th)
    write_table(out / "fit", ("theta_deg", "dop", "theta_out_deg"),
                np.column_stack([np.degrees(th), dop, np.degrees(tout)]), args.format)
    meas = np.array([[m.theta_in, m.dop, m.theta_out] for m in data])
    plot_birefringence(meas[:, 0], meas[:, 1], meas[:, 2], th, dop, tout, out / "fit.svg")
    report = {
        "phi": params.phi_linear, "chi": params.chi_circular, "beta": params.beta_axis,
        "errors": {"phi": err[0], "chi": err[1], "beta": err[2]}, "covariance": cov,
        "fiber_length_m": length, "beat_length_m": beat_length(params),
        "residuals": res, "n_points": len(data), "phi_seed": args.phi_seed,
        "data": Path(args.data).name,
    }
    write_json(out / "report.json", report)
    print(json.dumps(_jsonable({k: report[k] for k in ("phi", "chi", "beta", "beat_length_m")}), sort_keys=True))
    return EXIT_OK


# --------------------------------------------------------------------------
# generate-events


def cmd_generate_events(args) -> int:
    cfg = _config(args)
    run_dir = Path(args.run)
    tab = {}
    for name in ("run", "input"):
        found = [run_dir / f"{name}{ext}" for ext in (".csv", ".json") if (run_dir / f"{name}{ext}").exists()]
        if not found:
            raise ConfigError(f"no {name} table in {run_dir}")
        tab.update(read_table(found[0]))
    a = cfg.analysis
    nbar = a["nbar"] if args.nbar is None else args.nbar
    t = tab["t_ns"] * 1e-9
    spec = SyntheticRunSpec(
        t, tab["flux_fwd"], nbar, background_rate=a["background_rate"], n_cycles=a["n_cycles"],
        seed=cfg.seed, reference=tab["flux_in"], n_cycles_reference=a["n_cycles_reference"],
        background_rate_reference=a["background_rate_reference"],
        detection_efficiency=cfg.calibration.product,
    )
    stream = generate_events(spec)
    summary_file = run_dir / "summary.json"
    if summary_file.exists():
        hint = json.loads(summary_file.read_text()).get("retrieval_after_s")
        if hint is not None:
            stream.metadata["retrieval_after_ns"] = repr(round(hint * 1e9, 3))
    stream.metadata["nbar"] = repr(nbar)
    out = _out_dir(args)
    write_events(stream, out / "events.csv")
    print(json.dumps({"events": len(stream), "nbar": nbar, "seed": cfg.seed}, sort_keys=True))
    return EXIT_OK


# --------------------------------------------------------------------------
# analyze


def _smoothed_peak(h, mask):
    k = np.ones(5) / 5.0
    y = np.convolve(h.counts, k, mode="same")
    y = np.where(mask, y, -np.inf)
    return float(h.centers[int(np.argmax(y))])


def analyze_stream(stream, cfg: ExperimentConfig, *, n_cycles=None, retrieval_after_ns=None):
    """Full count pipeline; returns ``(report, histograms, fits)``."""
    a = cfg.analysis
    bin_ns = a["bin"] * 1e9
    margin = a["fit_margin"] * 1e9
    half = (a["snr_half_window"] or cfg.schedule["tau_p"]) * 1e9
    hists = bin_and_average(stream, cfg.timing, bin_ns, n_cycles=n_cycles)
    flags, fits, signals = [], {}, {}
    for cond in ("atoms", "reference"):
        if f"probe_{cond}" in hists and f"background_{cond}" in hists:
            signals[cond] = subtract_background(hists[f"probe_{cond}"], hists[f"background_{cond}"])

    if retrieval_after_ns is None and "retrieval_after_ns" in stream.metadata:
        retrieval_after_ns = float(stream.metadata["retrieval_after_ns"])

    ref = signals.get("reference")
    center_in = None
    if ref is not None and ref.total() > 0:
        try:
            c0 = _smoothed_peak(ref, np.ones(ref.counts.shape, bool))
            fits["input"] = gaussian_fit(ref, (c0 - margin, c0 + margin))
            center_in = fits["input"].params["center"]
        except (FitError, ValueError) as exc:
            flags.append(f"input fit failed: {exc}")
    else:
        flags.append("no reference pulse: eta and nbar undefined")

    sig = signals.get("atoms")
    if sig is not None and sig.total() > 0:
        after = retrieval_after_ns
        if after is None:
            after = (center_in if center_in is not None else 0.0) + margin
        region = sig.centers >= after
        if region.sum() >= 5 and np.any(sig.counts[region] > 0):
            c1 = _smoothed_peak(sig, region)
            try:
                fits["retrieved"] = gaussian_fit(sig, (max(after, c1 - margin), c1 + margin))
            except (FitError, ValueError) as exc:
                flags.append(f"retrieved fit failed: {exc}")
        else:
            flags.append("no counts after the retrieval start")
    else:
        flags.append("empty probe slots: eta undefined")

    eta = eta_err = None
    if "retrieved" in fits and "input" in fits:
        try:
            eta, eta_err = efficiency(fits["retrieved"], fits["input"])
        except ValueError as exc:
            flags.append(f"eta undefined: {exc}")
    nbar = nbar_err = None
    if ref is not None:
        nbar, nbar_err = mean_photon_number(ref, cfg.calibration)

    # background rate measured from the background slots of the atoms sequence
    bkey = "background_atoms" if "background_atoms" in hists else "background_reference"
    bh = hists[bkey]
    span_s = (bh.bin_edges[-1] - bh.bin_edges[0]) * 1e-9
    bg_rate = bh.total() / span_s
    snr_block = {"window": f"+/- {half:.6g} ns around the input-pulse center", "half_window_ns": half,
                 "background_rate_per_s": bg_rate, "background_condition": bkey}
    if ref is not None and center_in is not None and bg_rate > 0:
        snr_block["integrated"] = snr(ref, bg_rate, 2 * half * 1e-9, center_in)
        snr_block["peak_bin"] = peak_snr(ref, bg_rate)
    else:
        snr_block["integrated"] = snr_block["peak_bin"] = None
        flags.append("SNR undefined")

    report = {
        "eta": eta, "eta_err": eta_err, "nbar": nbar, "nbar_err": nbar_err, "snr": snr_block,
        "fits": {k: v.to_dict() for k, v in fits.items()},
        "conditions": {k: {"n_averaged": h.n_averaged, "counts_per_slot": h.total(),
                           "raw_counts": int(h.raw.sum())} for k, h in hists.items()},
        "excluded_events": hists.excluded, "n_events": len(stream),
        "pipeline": {"bin_ns": bin_ns, "fit_margin_ns": margin, "retrieval_after_ns": retrieval_after_ns,
                     "n_cycles": n_cycles, "timing": cfg.timing.to_dict(),
                     "calibration": {"detector_efficiency": cfg.calibration.detector_efficiency,
                                     "path_transmission": cfg.calibration.path_transmission}},
        "flags": flags,
    }
    return report, {**hists, **{f"signal_{k}": v for k, v in signals.items()}}, fits


def cmd_analyze(args) -> int:
    cfg = _config(args)
    if args.bin:
        cfg = cfg.with_value("analysis.bin", parse_quantity(args.bin, "time"))
    stream = ingest(args.events, cfg.timing)
    after = parse_quantity(args.retrieval_after, "time") * 1e9 if args.retrieval_after else None
    report, hists, fits = analyze_stream(stream, cfg, n_cycles=args.n_cycles, retrieval_after_ns=after)
    raw = Path(args.events).read_bytes()
    report["source"] = {"name": Path(args.events).name, "sha256": hashlib.sha256(raw).hexdigest()}
    report["config"] = _document(cfg)
    out = _out_dir(args)
    for name, h in sorted(hists.items()):
        write_table(out / f"hist_{name}", ("t_ns", "counts", "sigma"), h.rows(), args.format)
    write_json(out / "report.json", report)
    curves, fit_map = {}, {}
    norm = fits["input"].params["amplitude"] if "input" in fits else 1.0
    for label, key, fkey in (("input", "signal_reference", "input"), ("retrieved", "signal_atoms", "retrieved")):
        if key in hists:
            curves[label] = hists[key].scaled(norm)
            if fkey in fits:
                f = fits[fkey]
                vals = f.values.copy()
                vals[0] /= norm
                fit_map[label] = type(f)(f.model, f.names, vals, f.covariance, f.redchi2, f.window, f.bin_width)
    if curves:
        plot_histograms(curves, out / "analysis.svg", fit_map, ylabel="counts / input fit amplitude")
    print(json.dumps(_jsonable({k: report[k] for k in ("eta", "eta_err", "nbar", "nbar_err")}), sort_keys=True))
    return EXIT_OK


# --------------------------------------------------------------------------
# sweep


def _parabolic_peak(x, y):
    k = int(np.nanargmax(y))
    if 0 < k < len(x) - 1:
        x3, y3 = np.asarray(x[k - 1:k + 2], float), np.asarray(y[k - 1:k + 2], float)
        c = np.polyfit(x3, y3, 2)
        if c[0] < 0:
            return float(np.clip(-c[1] / (2 * c[0]), x3[0], x3[-1]))
    return float(x[k])


def sweep_values(args, cfg) -> list:
    if args.values:
        items = [v.strip() for v in args.values.split(",") if v.strip()]
    else:
        start, stop, n = args.range
        n = int(n)
        if n < 1:
            raise ConfigError("range needs at least one point")
        if args.ratio:
            items = [repr(float(v)) for v in np.linspace(float(start), float(stop), n)]
        else:
            sec, _, key = args.parameter.partition(".")
            kind = SCHEMA.get(sec, {}).get(key, ("number",))[0]
            lo = _value(start, kind, cfg)
            hi = _value(stop, kind, cfg)
            return list(np.linspace(lo, hi, n))
    sec, _, key = args.parameter.partition(".")
    kind = SCHEMA.get(sec, {}).get(key, ("number",))[0]
    return [float(v) if args.ratio else _value(v, kind, cfg) for v in items]


def _value(text, kind, cfg):
    if kind in ("number",):
        return float(text)
    if kind == "int":
        return int(text)
    return parse_quantity(text, "time" if kind == "optional_time" else kind, gamma=cfg.medium.gamma,
                          length=cfg.medium.length)


def cmd_sweep(args) -> int:
    cfg = _config(args)
    path = args.parameter
    sec, _, key = path.partition(".")
    if sec not in SCHEMA or key not in SCHEMA[sec] or SCHEMA[sec][key][0] in ("str",):
        raise ConfigError(f"invalid parameter path {path!r}")
    if args.ratio and path != "controls.rabi_minus":
        raise ConfigError("--ratio applies to controls.rabi_minus only")
    values = sweep_values(args, cfg)
    rows, notes = [], []
    for v in values:
        level = level_for_ratio(cfg.controls.rabi_plus, v) if args.ratio else v
        run_cfg = cfg.with_value(path, level)
        _, summ = run_mode(run_cfg)
        ratio = summ.get("ratio", float("nan"))
        rows.append([level, ratio, summ.get("eta", float("nan")), summ.get("leakage", float("nan")),
                     summ.get("drift_velocity", float("nan"))])
        notes.extend(summ["warnings"])
    rows = np.array(rows, dtype=float)
    out = _out_dir(args)
    cols = ("value", "ratio", "eta", "leakage", "drift_velocity")
    write_table(out / "sweep", cols, rows, args.format)
    eta = rows[:, 2]
    x = rows[:, 1] if args.ratio or path == "controls.rabi_minus" else rows[:, 0]
    best = {"index": int(np.nanargmax(eta)), "x_grid": float(x[int(np.nanargmax(eta))]),
            "x_refined": _parabolic_peak(x, eta), "eta": float(np.nanmax(eta))} if np.any(np.isfinite(eta)) else None
    summary = {"parameter": path, "as_ratio": bool(args.ratio), "n_runs": len(values), "best": best,
               "warnings": sorted(set(notes)), "config": _document(cfg)}
    write_json(out / "sweep_summary.json", summary)
    plot_sweep(x, {"eta": eta, "leakage": rows[:, 3]}, out / "sweep.svg",
               xlabel="ratio" if path == "controls.rabi_minus" else path)
    print(json.dumps(_jsonable({"best": best}), sort_keys=True))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _globals(parser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", action="append", default=d if suppress else [], metavar="FILE",
                        help="TOML config layer; repeatable, later files win")
    parser.add_argument("--seed", type=int, default=d, help="64-bit seed (overrides config)")
    parser.add_argument("--out", default=d, help=f"output directory (default ${ENV_OUT} or ./{DEFAULT_OUT})")
    parser.add_argument("--format", choices=("csv", "json"), default=d if suppress else "csv",
                        help="format of tabular outputs")
    parser.add_argument("--set", action="append", default=d if suppress else [], metavar="SECTION.KEY=VALUE",
                        help="override one config value; repeatable")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stoplight", description="Slow, stored and stationary light toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _globals(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the Maxwell-Bloch solver")
    s.add_argument("--mode", choices=("slow-light", "lsr", "slp"), help="override schedule.mode")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit-birefringence", help="fit fiber birefringence to DOP data")
    f.add_argument("data", help="DOP table or polarizer-scan CSV")
    f.add_argument("--phi-seed", type=float, required=True, help="linear phase seed (rad), >= pi")
    f.add_argument("--fiber-length", default="1 m", help='fiber length with unit, e.g. "22 cm"')
    f.set_defaults(func=cmd_fit_birefringence)

    g = sub.add_parser("generate-events", help="synthetic photon events from a simulate output")
    g.add_argument("--run", required=True, help="directory written by simulate")
    g.add_argument("--nbar", type=float, help="photons per input pulse (overrides analysis.nbar)")
    g.set_defaults(func=cmd_generate_events)

    a = sub.add_parser("analyze", help="count-analysis pipeline on an event file")
    a.add_argument("events", help="event CSV t_ns,cycle_id,atoms,probe_on")
    a.add_argument("--bin", help='bin width with unit, e.g. "30 ns"')
    a.add_argument("--n-cycles", type=int, help="loading cycles (default: file metadata, else 60)")
    a.add_argument("--retrieval-after", help="retrieved-pulse search start (time with unit)")
    a.set_defaults(func=cmd_analyze)

    w = sub.add_parser("sweep", help="independent runs over one config parameter")
    w.add_argument("--parameter", required=True, help="section.key, e.g. controls.rabi_minus")
    grp = w.add_mutually_exclusive_group(required=True)
    grp.add_argument("--values", help="comma-separated values with units")
    grp.add_argument("--range", nargs=3, metavar=("START", "STOP", "N"), help="inclusive linear range")
    w.add_argument("--ratio", action="store_true", help="values are backward/forward control ratios")
    w.set_defaults(func=cmd_sweep)

    for sp in (s, f, g, a, w):
        _globals(sp, suppress=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001
        err = exc
    # most specific class first
    table = ((SolverError, EXIT_SOLVER, "solver error"), (FitError, EXIT_FIT, "fit error"),
             (AnalysisError, EXIT_ANALYSIS, "analysis error"),
             ((ConfigError, EventFormatError, FileNotFoundError), EXIT_CONFIG, "input error"),
             ((StoplightError, ValueError), EXIT_CONFIG, "invalid input"))
    for cls, code, label in table:
        if isinstance(err, cls):
            break
    else:
        raise err
    print(f"stoplight: {label}: {err}", file=sys.stderr)
    for line in getattr(err, "diagnostics", ())[:20]:
        print(f"  {line}", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
