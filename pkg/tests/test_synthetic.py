import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from stoplight.counts import bin_and_average, format_events, parse_events
from stoplight.schedule import MeasurementTiming
from stoplight.synthetic import SyntheticRunSpec, generate_events, make_rng, write_events

T = np.linspace(0.0, 2.4e-6, 2001)
F = np.exp(-((2 * (T - 1.0e-6) / 150e-9) ** 2))


def spec(**kw):
    kw.setdefault("seed", 0)
    return SyntheticRunSpec(T, F, kw.pop("nbar", 1.0), **kw)


def test_nothing_in_nothing_out():
    s = generate_events(spec(nbar=0.0, background_rate=0.0))
    assert len(s) == 0
    assert s.n_cycles(True) == 60
    assert format_events(s).count("\n") == len(format_events(s).splitlines())


def test_total_signal_within_poisson_interval():
    s = generate_events(spec(nbar=17.0, seed=4))
    # 25 probe windows x 60 cycles
    lo, hi = stats.poisson.interval(0.99, 17.0 * 1500)
    assert lo <= len(s) <= hi
    assert np.all(s.probe_on)


def test_background_count_expectation():
    # 1.1e4 /s over a 200 us sequence for 60 cycles
    rate, total, cycles = 1.1e4, 200e-6, 60
    assert rate * total * cycles == pytest.approx(132.0)
    counts = [len(generate_events(spec(nbar=0.0, background_rate=rate, seed=k))) for k in range(200)]
    assert np.mean(counts) == pytest.approx(132.0, abs=4 * math.sqrt(132.0 / 200))
    assert np.var(counts) == pytest.approx(132.0, rel=0.3)


def test_background_evenly_split_between_slots():
    s = generate_events(spec(nbar=0.0, background_rate=1e6, seed=1))
    frac = np.mean(s.probe_on)
    assert frac == pytest.approx(0.5, abs=4 * math.sqrt(0.25 / len(s)))


def test_deterministic_for_seed(tmp_path):
    a = write_events(generate_events(spec(nbar=3.0, background_rate=1e4, seed=7)), tmp_path / "a.csv")
    b = write_events(generate_events(spec(nbar=3.0, background_rate=1e4, seed=7)), tmp_path / "b.csv")
    c = write_events(generate_events(spec(nbar=3.0, background_rate=1e4, seed=8)), tmp_path / "c.csv")
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()
    assert make_rng(3).random() == make_rng(3).random()


def test_arrival_times_follow_trace():
    s = generate_events(spec(nbar=20.0, seed=2))
    local = (s.t_ns % 4000.0) * 1e-9
    # pulse is a Gaussian with standard deviation tau/(2 sqrt 2)
    sd = 150e-9 / (2 * math.sqrt(2))
    assert stats.kstest(local, "norm", args=(1.0e-6, sd)).pvalue > 1e-3


def test_reference_cycles_and_metadata():
    ref = np.exp(-((2 * (T - 0.8e-6) / 150e-9) ** 2))
    sp = spec(nbar=2.0, reference=ref, n_cycles_reference=10, n_cycles=20, seed=3)
    s = generate_events(sp)
    assert s.metadata == {"n_cycles_atoms": 20, "n_cycles_reference": 10, "seed": 3}
    back = parse_events(format_events(s))
    assert back.n_cycles(True) == 20 and back.n_cycles(False) == 10
    hs = bin_and_average(back, MeasurementTiming())
    assert hs["probe_reference"].total() == pytest.approx(2.0, abs=4 * math.sqrt(2.0 / 250))
    assert sp.expected_signal(reference=True) == pytest.approx(2.0, rel=1e-9)


def test_input_area_scales_output():
    sp = spec(nbar=1.0, input_area=2 * float(np.trapezoid(F, T)))
    assert sp.expected_signal() == pytest.approx(0.5)
    assert spec(nbar=1.0, detection_efficiency=0.25).expected_signal() == pytest.approx(0.25)


@pytest.mark.parametrize("kw", [
    dict(nbar=-1.0),
    dict(background_rate=-1.0),
    dict(n_cycles=0),
    dict(n_cycles_reference=2),
    dict(detection_efficiency=0.0),
    dict(t_offset=2e-6),
])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        spec(**kw)


def test_trace_validation():
    with pytest.raises(ValueError):
        SyntheticRunSpec(T[::-1], F, 1.0)
    with pytest.raises(ValueError):
        SyntheticRunSpec(T, -F, 1.0)
    with pytest.raises(ValueError):
        SyntheticRunSpec(T, F[:-1], 1.0)
    with pytest.raises(ValueError):
        SyntheticRunSpec(T, np.zeros_like(F), 1.0).scale()


@given(st.floats(0.0, 5.0), st.integers(0, 2**32))
@settings(max_examples=20, deadline=None)
def test_stream_always_parses(nbar, seed):
    s = generate_events(spec(nbar=nbar, background_rate=2e4, n_cycles=2, seed=seed))
    back = parse_events(format_events(s))
    assert len(back) == len(s)
