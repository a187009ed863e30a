import math
import warnings

import numpy as np
import pytest

import oracles
from stoplight.counts import decay_fit
from stoplight.eit import RB87_D1_GAMMA as G
from stoplight.eit import AtomicMedium, group_delay
from stoplight.errors import BoundaryContaminationError, ConfigError, SolverError
from stoplight.schedule import gaussian_probe, slow_light_schedule
from stoplight.solver import (
    FieldState,
    SolverConfig,
    centroid_velocity,
    evolve,
    level_for_ratio,
    run_lsr,
    run_slow_light,
    run_slp,
    slow_light_delay,
    slp_velocity_factor,
)

# frozen from oracles.fft_slow_light: d = 100, rabi = 3.5, tau_p = 30 / Gamma,
# t0 = 60 / Gamma, transit 1 / Gamma (transmitted energy, centroid delay / Gamma)
FFT_T_100 = 0.9941045167
FFT_DELAY_100 = 9.179441


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def slow(d, rabi, tau_g, nz=256, lc=1.0, peak=1e-4):
    return run_slow_light(SolverConfig(nz=nz, light_transit=lc), AtomicMedium(d_opt=d), rabi,
                          tau_p=tau_g / G, probe_peak=peak)


# ---------------------------------------------------------------- closed forms


def test_velocity_factor():
    assert slp_velocity_factor(1.0, 1.0) == 0.0
    assert slp_velocity_factor(0.0, 2.0) == 1.0
    assert slp_velocity_factor(1.84, 1.0) == pytest.approx(-0.544, abs=5e-4)
    with pytest.raises(ValueError):
        slp_velocity_factor(0.0, 0.0)


def test_level_for_ratio():
    for r in (0.0, 0.5, 1.0, 1.84):
        wm = level_for_ratio(3.5, r)
        wp = math.sqrt(3.5**2 - wm**2)
        assert wm / wp == pytest.approx(r)


# ---------------------------------------------------------------- config and state


def test_config_validation():
    with pytest.raises(ConfigError):
        SolverConfig(nz=32)
    with pytest.raises(ConfigError):
        SolverConfig(light_transit=0)
    with pytest.raises(ConfigError):
        SolverConfig(truncation_order=2)
    with pytest.raises(ConfigError):
        SolverConfig(decay_convention="energy")
    c = SolverConfig(nz=101, light_transit=0.5)
    # characteristic step: one cell per step
    assert c.dt_gamma * (1 / c.light_transit) == pytest.approx(1.0 / 100)


def test_state_validation():
    with pytest.raises(ConfigError):
        FieldState.empty(32, 0.03)
    s = FieldState.empty(64, 0.03)
    with pytest.raises(ConfigError):
        evolve(s, slow_light_schedule(1.0), 0, 1e-7, medium=AtomicMedium(), config=SolverConfig(nz=128))
    with pytest.raises(ConfigError):
        evolve(None, slow_light_schedule(1.0), 1e-7, 0, medium=AtomicMedium())


def test_compiled_kernel_matches_reference():
    m = AtomicMedium(d_opt=30, gamma21=0.01 * G)
    sched = slow_light_schedule(2.0, 0.0, 2e-6).with_probe(gaussian_probe(100e-9, 250e-9, 1e-4))
    cfg = SolverConfig(nz=64, phase_mismatch=30.0)
    a = evolve(None, sched, 0, 8e-7, medium=m, config=cfg)
    b = evolve(None, sched, 0, 8e-7, medium=m, config=cfg, use_numpy=True)
    assert np.allclose(a.flux_fwd, b.flux_fwd, rtol=1e-12, atol=1e-22)
    assert np.allclose(a.final_state.spin, b.final_state.spin, rtol=1e-12, atol=1e-16)


# ---------------------------------------------------------------- propagation limits


def test_beer_lambert():
    r = slow(5.0, 0.0, 120.0, nz=64)
    assert r.area("flux_fwd") / r.area("flux_in") == pytest.approx(math.exp(-5), rel=0.02)


def test_empty_medium_transit():
    r = slow(0.0, 0.0, 30.0)
    assert r.area("flux_fwd") / r.area("flux_in") == pytest.approx(1.0, abs=1e-9)
    assert slow_light_delay(r) * G == pytest.approx(1.0, abs=1e-6)


def test_slow_light_matches_frequency_domain_oracle():
    tau, t0 = 30.0, 60.0
    r = slow(100.0, 3.5, tau)
    t = np.arange(2**15) * 0.02
    out, inp = oracles.fft_slow_light(100.0, 3.5, tau, t0, 1.0, t)
    delay = (np.sum(t * out) / np.sum(out)) - (np.sum(t * inp) / np.sum(inp))
    assert np.sum(out) / np.sum(inp) == pytest.approx(FFT_T_100, rel=1e-7)
    assert delay == pytest.approx(FFT_DELAY_100, abs=1e-4)
    assert r.area("flux_fwd") / r.area("flux_in") == pytest.approx(FFT_T_100, abs=1e-4)
    assert slow_light_delay(r) * G == pytest.approx(FFT_DELAY_100, rel=1e-3)
    # adiabatic EIT: high transmission, delay near L / v_gr
    assert r.area("flux_fwd") / r.area("flux_in") >= 0.95
    assert slow_light_delay(r) * G - 1.0 == pytest.approx(100 / 3.5**2, rel=0.10)


def test_delay_quadruples_when_rabi_halves():
    d1 = slow_light_delay(slow(100.0, 3.5, 60.0)) * G - 1.0
    d2 = slow_light_delay(slow(100.0, 1.75, 60.0)) * G - 1.0
    assert d2 / d1 == pytest.approx(4.0, rel=0.05)


def test_no_transmitted_pulse():
    r = slow(200.0, 0.0, 30.0, nz=64)
    with pytest.raises(SolverError):
        slow_light_delay(r)


def test_linearity_exact():
    a = slow(100.0, 3.5, 30.0, nz=128, peak=1e-4)
    b = slow(100.0, 3.5, 30.0, nz=128, peak=4e-4)
    assert np.allclose(b.flux_fwd, 4 * a.flux_fwd, rtol=1e-12, atol=0)
    assert np.allclose(b.final_state.spin, 2 * a.final_state.spin, rtol=1e-12, atol=1e-30)


def test_weak_probe_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        with pytest.raises(RuntimeWarning, match="weak-probe"):
            slow(10.0, 1.0, 30.0, nz=64, peak=1.0)


# ---------------------------------------------------------------- storage and retrieval


def lsr(tau, nz=256, lc=0.25, g21=0.0, conv="amplitude", d=109.0):
    cfg = SolverConfig(nz=nz, light_transit=lc, decay_convention=conv)
    return run_lsr(cfg, AtomicMedium(d_opt=d, gamma21=g21 * G), tau)


def test_lsr_efficiency_independent_of_storage_time_without_decay():
    etas = [lsr(t, nz=128)[1] for t in (100e-9, 200e-9, 500e-9)]
    assert max(etas) - min(etas) < 0.01 * max(etas)
    assert 0.5 < etas[0] < 1.0


def test_lsr_grid_convergence():
    a = lsr(200e-9, nz=256)[1]
    b = lsr(200e-9, nz=512)[1]
    assert abs(a - b) < 0.01 * b


def test_lsr_light_speed_rescaling_invariance():
    a = lsr(200e-9, lc=0.25)[1]
    b = lsr(200e-9, lc=0.125)[1]
    assert abs(a - b) < 0.01 * a


def test_lsr_info_and_leakage_warning():
    res, eta = lsr(200e-9, nz=128)
    info = res.info
    assert info["eta"] == eta
    assert info["leakage"] == pytest.approx(info["leakage_fwd"] + info["leakage_bwd"])
    assert info["stored"] > 0.5
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        with pytest.raises(RuntimeWarning, match="leakage"):
            # switch-off while the trailing half of the pulse is still outside
            run_lsr(SolverConfig(nz=64), AtomicMedium(d_opt=109), 200e-9, t_switch=310e-9)


@pytest.mark.parametrize("conv,factor", [("amplitude", 2.0), ("efficiency", 1.0)])
def test_lsr_decay_rate_follows_convention(conv, factor):
    g21 = 0.02
    pts = []
    for tau in (100e-9, 200e-9, 350e-9, 500e-9):
        eta = lsr(tau, nz=128, g21=g21, conv=conv)[1]
        pts.append((tau, eta, 1e-3 * eta))
    fit = decay_fit(pts, G)
    assert fit.rate_efficiency / G == pytest.approx(factor * g21, rel=0.01)


def test_lsr_requires_control():
    with pytest.raises(ConfigError):
        run_lsr(SolverConfig(nz=64), AtomicMedium(), 2e-7, rabi=0.0)


# ---------------------------------------------------------------- stationary light


SLP_MEDIUM = AtomicMedium(d_opt=80, length=0.03)


def slp(ratio, dk=0.0, dm=0.0, nz=128, **kw):
    cfg = SolverConfig(nz=nz, phase_mismatch=dk)
    return run_slp(cfg, SLP_MEDIUM, 500e-9, level_for_ratio(3.5, ratio), detuning_minus=dm, **kw)


def test_slp_without_backward_control_is_slow_light():
    res, eta, leak = slp(0.0)
    ref = run_slow_light(SolverConfig(nz=128), SLP_MEDIUM, 3.5, t_end=res.t[-1])
    n = min(ref.t.size, res.t.size)
    assert np.allclose(res.flux_fwd[:n], ref.flux_fwd[:n], rtol=1e-12, atol=1e-20)
    assert np.all(res.flux_bwd == 0)


def test_slp_unbalanced_suppresses_retrieval():
    _, eta_bal, _ = slp(1.0)
    _, eta_un, _ = slp(1.84)
    assert eta_un < 0.01 * eta_bal


def test_slp_eta_non_increasing_in_phase_mismatch():
    etas = [slp(1.0, dk)[1] for dk in (0.0, 20.0, 40.0, 80.0, 160.0)]
    assert np.all(np.diff(etas) <= 1e-12)


def test_slp_backward_drift_delays_retrieval():
    a, _, _ = slp(1.0)
    b, _, _ = slp(1.84)
    late = lambda r: r.info["retrieval_centroid"] - r.info["events"]["slp_ramp_off"]
    assert late(b) > late(a)


def test_slp_info_keys():
    res, eta, leak = slp(1.0)
    for key in ("eta", "leakage", "ratio", "omega_plus_slp", "drift_velocity", "retrieval_centroid", "events"):
        assert key in res.info
    assert res.info["ratio"] == pytest.approx(1.0)
    assert math.isnan(res.info["drift_velocity"])


def test_slp_requires_positive_omega0():
    with pytest.raises(ConfigError):
        run_slp(SolverConfig(nz=64), SLP_MEDIUM, 5e-7, 0.0, omega0=0.0)


# ---------------------------------------------------------------- centroid velocity


def test_centroid_velocity_errors():
    res, _, _ = slp(1.0, n_snapshots=3)
    ev = res.info["events"]
    with pytest.raises(ValueError):
        centroid_velocity(res.snapshots[:2], (ev["slp_start"], ev["slp_end"]))
    # a fast pulse reaching the far end touches the boundary
    times = tuple(np.linspace(2.5e-7, 3.5e-7, 5))
    r = run_slow_light(SolverConfig(nz=128, snapshot_times=times), AtomicMedium(d_opt=5.0), 3.5)
    with pytest.raises(BoundaryContaminationError):
        centroid_velocity(r.snapshots, (times[0] - 1e-9, times[-1] + 1e-9))


def test_centroid_velocity_slow_light():
    # ratio 0: the polariton moves at v_gr
    m = AtomicMedium(d_opt=1000, length=0.03)
    lc, w, tau = 1.0, 5.33, 5.42 / G
    t_in = 2 * tau + 0.5 * (lc / G + group_delay(w**2, m))
    times = tuple(t_in + k * 0.5 / G for k in range(-6, 7))
    cfg = SolverConfig(nz=512, light_transit=lc, snapshot_times=times)
    r = run_slow_light(cfg, m, w, tau_p=tau)
    v = centroid_velocity(r.snapshots, (times[0] - 1e-9, times[-1] + 1e-9))
    v_gr = w**2 * G * m.length / m.d_opt
    assert v == pytest.approx(v_gr, rel=0.10)
