import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from stoplight.errors import ScheduleError
from stoplight.schedule import (
    ControlSchedule,
    Envelope,
    MeasurementTiming,
    Segment,
    SlpOffsets,
    constant_envelope,
    gaussian_probe,
    lsr_schedule,
    measurement_timing,
    schedule_table,
    slp_schedule,
    slow_light_schedule,
    smoothstep,
)

NS = 1e-9


# ---------------------------------------------------------------- segments and envelopes


def test_segment_validation():
    with pytest.raises(ScheduleError):
        Segment(0, 1, "sine", {})
    with pytest.raises(ScheduleError):
        Segment(0, 1, "linear", {"start": 1})
    with pytest.raises(ScheduleError):
        Segment(1, 1, "constant", {"value": 1})
    with pytest.raises(ScheduleError):
        Segment(0, 1, "constant", {"value": -1})
    with pytest.raises(ScheduleError):
        Segment(0, 1, "gaussian", {"peak": 1, "center": 0, "width": 0})


def test_envelope_contiguity_and_extension():
    with pytest.raises(ScheduleError):
        Envelope([Segment(0, 1, "constant", {"value": 1}), Segment(1.5, 2, "constant", {"value": 1})])
    with pytest.raises(ScheduleError):
        Envelope([])
    env = Envelope([Segment(0, 1, "linear", {"start": 0, "end": 2}), Segment(1, 2, "constant", {"value": 2})])
    assert env(-5.0) == 0.0 and env(0.5) == pytest.approx(1.0) and env(10.0) == 2.0
    assert env.max_jump() == 0.0
    assert np.array_equal(env.breakpoints, [0, 1, 2])


def test_smoothstep_c1():
    x = np.linspace(0, 1, 1001)
    y = smoothstep(x)
    assert y[0] == 0 and y[-1] == 1
    dy = np.gradient(y, x)
    assert abs(dy[0]) < 1e-2 and abs(dy[-1]) < 1e-2
    assert np.all(np.diff(y) >= 0)


def test_envelope_dict_round_trip():
    s = lsr_schedule(3.6, 200 * NS, t_switch=400 * NS)
    assert Envelope.from_dict(s.control_fwd.to_dict()) == s.control_fwd
    s2 = ControlSchedule.from_dict(s.with_probe(gaussian_probe(150 * NS, 200 * NS)).to_dict())
    assert s2.probe.peak_time() == pytest.approx(200 * NS)
    assert s2.events == s.events


# ---------------------------------------------------------------- gaussian probe


def test_probe_width_definition():
    tau, t0 = 150 * NS, 500 * NS
    p = gaussian_probe(tau, t0, peak=2.0)
    assert p(t0) == 2.0
    assert p(t0 + tau / 2) / p(t0) == pytest.approx(math.exp(-1), rel=1e-14)
    assert p(t0 - tau / 2) / p(t0) == pytest.approx(math.exp(-1), rel=1e-14)


def test_probe_area():
    tau, t0 = 150 * NS, 800 * NS
    p = gaussian_probe(tau, t0, peak=3.0)
    t = np.linspace(t0 - 4 * tau, t0 + 4 * tau, 20001)
    area = integrate.trapezoid(p(t), t)
    assert area == pytest.approx(3.0 * tau * math.sqrt(math.pi) / 2, rel=1e-9)


def test_probe_errors():
    with pytest.raises(ScheduleError):
        gaussian_probe(0.0, 0.0)
    with pytest.raises(ScheduleError):
        gaussian_probe(1.0, 0.0, peak=-1)


# ---------------------------------------------------------------- LSR


def test_lsr_structure():
    s = lsr_schedule(3.6, 200 * NS, 30 * NS, t_switch=400 * NS)
    ev = s.events
    assert ev["off"] - ev["switch_off"] == pytest.approx(30 * NS)
    assert ev["switch_on"] - ev["off"] == pytest.approx(200 * NS)
    t = np.linspace(0, 1.5e-6, 3001)
    _, wp, wm = s.evaluate(t)
    assert np.all(wm == 0)
    assert np.all(wp[t < ev["switch_off"]] == 3.6)
    hold = (t > ev["off"]) & (t < ev["switch_on"])
    assert np.all(wp[hold] == 0)
    assert np.all(wp[t > ev["on"]] == 3.6)
    assert s.control_fwd.max_jump() == 0.0


def test_lsr_zero_hold_is_dip():
    s = lsr_schedule(2.0, 0.0, 30 * NS, t_switch=100 * NS)
    assert s.events["on"] - s.events["switch_off"] == pytest.approx(60 * NS)
    t = np.linspace(0, 300 * NS, 6001)
    wp = s.control_fwd(t)
    low = t[wp < 1e-9]
    assert low.size and low.max() - low.min() < 1e-9
    assert wp.min() == pytest.approx(0.0, abs=1e-12)


def test_lsr_errors():
    with pytest.raises(ScheduleError):
        lsr_schedule(3.6, 200 * NS, 0.0, t_switch=400 * NS)
    with pytest.raises(ScheduleError):
        lsr_schedule(3.6, -1 * NS, t_switch=400 * NS)
    with pytest.raises(ScheduleError):
        lsr_schedule(3.6, 200 * NS, 100 * NS, t_switch=50 * NS)


def test_probe_must_precede_switch_off():
    s = lsr_schedule(3.6, 200 * NS, t_switch=400 * NS)
    with pytest.raises(ScheduleError):
        s.with_probe(gaussian_probe(150 * NS, 450 * NS))
    assert s.with_probe(gaussian_probe(150 * NS, 300 * NS)).tau_lsr == 200 * NS


# ---------------------------------------------------------------- SLP


def test_slp_levels():
    s = slp_schedule(3.5, 2.3, 500 * NS, SlpOffsets(t_on=600 * NS))
    mid = s.events["slp_start"] + 250 * NS
    _, wp, wm = s.evaluate(np.array([mid]))
    assert wp[0] == pytest.approx(math.sqrt(12.25 - 5.29))
    assert wp[0] == pytest.approx(2.64, abs=5e-3)
    assert wm[0] == 2.3
    assert s.dt_slp == pytest.approx(530 * NS)


def test_slp_boundary_levels():
    s = slp_schedule(3.5, 0.0, 500 * NS, SlpOffsets(t_on=600 * NS))
    t = np.linspace(0, 2e-6, 2001)
    _, wp, wm = s.evaluate(t)
    assert np.all(wp == 3.5) and np.all(wm == 0)
    s = slp_schedule(3.5, 3.5, 500 * NS, SlpOffsets(t_on=600 * NS))
    mid = np.array([s.events["slp_start"] + 1 * NS])
    assert s.control_fwd(mid)[0] == 0.0


def test_slp_errors():
    with pytest.raises(ScheduleError):
        slp_schedule(3.5, 3.6, 500 * NS, SlpOffsets(t_on=600 * NS))
    with pytest.raises(ScheduleError):
        slp_schedule(3.5, 1.0, -1.0, SlpOffsets(t_on=600 * NS))
    with pytest.raises(ScheduleError):
        slp_schedule(3.5, 1.0, 500 * NS, SlpOffsets(t_on=100 * NS, shift=-200 * NS))


def test_slp_shift_moves_both_edges():
    a = slp_schedule(3.5, 2.0, 500 * NS, SlpOffsets(t_on=600 * NS))
    b = slp_schedule(3.5, 2.0, 500 * NS, SlpOffsets(t_on=600 * NS, shift=-115 * NS))
    for k in a.events:
        assert b.events[k] - a.events[k] == pytest.approx(-115 * NS)


@given(st.floats(0.5, 10), st.floats(0, 1), st.floats(10 * NS, 1e-6))
def test_slp_omega0_constant_on_plateaus(w0, frac, tau):
    s = slp_schedule(w0, frac * w0, tau, SlpOffsets(t_on=400 * NS))
    ev = s.events
    t = np.concatenate([
        np.linspace(0, ev["slp_ramp_on"], 50, endpoint=False),
        np.linspace(ev["slp_start"], ev["slp_end"], 50),
        np.linspace(ev["slp_ramp_off"], ev["slp_ramp_off"] + 500 * NS, 50),
    ])
    _, wp, wm = s.evaluate(t)
    assert np.allclose(wp**2 + wm**2, w0**2, rtol=1e-12)
    assert max(s.control_fwd.max_jump(), s.control_bwd.max_jump()) < 1e-12 * w0


# ---------------------------------------------------------------- misc schedules


def test_slow_light_and_constant():
    s = slow_light_schedule(3.5)
    _, wp, wm = s.evaluate(np.linspace(-1e-6, 2e-6, 11))
    assert np.all(wp == 3.5) and np.all(wm == 0)
    assert constant_envelope(1.0)(5.0) == 1.0


def test_schedule_table_columns():
    s = lsr_schedule(3.6, 200 * NS, t_switch=400 * NS).with_probe(gaussian_probe(150 * NS, 200 * NS))
    tab = schedule_table(s, np.array([0.0, 200 * NS]))
    assert tab.shape == (2, 4)
    assert tab[1, 0] == pytest.approx(200.0)
    assert tab[1, 1] == 1.0 and tab[1, 2] == 3.6 and tab[1, 3] == 0.0


# ---------------------------------------------------------------- measurement timing


def test_measurement_timing_defaults():
    m = measurement_timing()
    assert m.total_duration == pytest.approx(200e-6)
    assert m.n_probe == m.n_background == 25
    assert m.frequency == pytest.approx(250e3)
    assert 1 / m.frequency == pytest.approx(4e-6)
    assert m.slot_kinds().count("probe") == 25
    assert m.slot_kinds().count("background") == 25
    assert m.slot_kind(0) == "probe" and m.slot_kind(49) == "background"
    with pytest.raises(IndexError):
        m.slot_kind(50)


def test_slots_tile_sequence():
    m = measurement_timing()
    e = m.slot_edges()
    assert e[0] == 0 and e[-1] == pytest.approx(200e-6)
    assert np.allclose(np.diff(e), 4e-6, rtol=0, atol=1e-18)
    assert m.prep_edges()[-1] == 0 and m.prep_edges().size == 5


def test_measurement_timing_validation():
    with pytest.raises(ScheduleError):
        MeasurementTiming(window_open=5e-6)
    with pytest.raises(ScheduleError):
        MeasurementTiming(n_probe=30)
    with pytest.raises(ScheduleError):
        MeasurementTiming(n_prep=-1)
    assert measurement_timing(n_windows=60).n_windows == 60
