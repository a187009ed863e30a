import json
from importlib import resources

import numpy as np
import pytest

from stoplight.cli import (
    EXIT_ANALYSIS,
    EXIT_CONFIG,
    EXIT_FIT,
    EXIT_OK,
    main,
    read_table,
    write_table,
)

DATA = resources.files("stoplight.data")
FAST = ["--set", "solver.nz=64"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def lsr_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("lsr")
    assert run("simulate", "--out", out, *FAST) == EXIT_OK
    return out


def test_simulate_outputs(lsr_run):
    for name in ("run.csv", "input.csv", "schedule.csv", "spectrum.csv", "summary.json", "run.svg"):
        assert (lsr_run / name).exists()
    summ = json.loads((lsr_run / "summary.json").read_text())
    assert summ["mode"] == "lsr" and 0.7 < summ["eta"] < 0.85
    tab = read_table(lsr_run / "run.csv")
    assert set(tab) == {"t_ns", "flux_fwd", "flux_bwd", "omega_plus", "omega_minus"}
    assert (lsr_run / "run.svg").read_text().lstrip().startswith("<?xml")


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("STOPLIGHT_OUT", str(tmp_path / "env"))
    assert run("simulate", "--mode", "slow-light", *FAST) == EXIT_OK
    summ = json.loads((tmp_path / "env" / "summary.json").read_text())
    assert summ["mode"] == "slow-light" and 0 < summ["transmission"] <= 1


def test_json_format(tmp_path):
    assert run("simulate", "--out", tmp_path, "--format", "json", "--mode", "slow-light", *FAST) == EXIT_OK
    d = json.loads((tmp_path / "run.json").read_text())
    assert d["columns"][0] == "t_ns"
    assert read_table(tmp_path / "run.json")["t_ns"].size == len(d["rows"])


def test_table_round_trip(tmp_path):
    data = np.array([[1.0, 2.5], [3.0, -4.25e-9]])
    for fmt in ("csv", "json"):
        p = write_table(tmp_path / "t", ("a", "b"), data, fmt)
        back = read_table(p)
        assert np.allclose(back["a"], data[:, 0]) and np.allclose(back["b"], data[:, 1])


def test_events_and_analysis_pipeline(lsr_run, tmp_path):
    assert run("generate-events", "--run", lsr_run, "--out", tmp_path, "--nbar", 17, "--seed", 3) == EXIT_OK
    ev = (tmp_path / "events.csv").read_text()
    assert "# n_cycles_atoms=60" in ev and "# retrieval_after_ns=" in ev
    assert run("analyze", tmp_path / "events.csv", "--out", tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())
    summ = json.loads((lsr_run / "summary.json").read_text())
    assert rep["eta"] == pytest.approx(summ["eta"], abs=4 * rep["eta_err"])
    assert rep["nbar"] == pytest.approx(17.0, abs=4 * rep["nbar_err"])
    assert rep["pipeline"]["bin_ns"] == pytest.approx(30.0)
    assert rep["conditions"]["probe_atoms"]["n_averaged"] == 1500
    assert len(rep["source"]["sha256"]) == 64
    assert (tmp_path / "analysis.svg").exists()
    assert (tmp_path / "hist_probe_atoms.csv").exists()


def test_default_cycles_without_metadata(tmp_path):
    p = tmp_path / "ev.csv"
    p.write_text("t_ns,cycle_id,atoms,probe_on\n1000.0,0,1,1\n5000.0,0,1,1\n")
    assert run("analyze", p, "--out", tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["conditions"]["probe_atoms"]["n_averaged"] == 25 * 60
    assert run("analyze", p, "--out", tmp_path, "--n-cycles", 10) == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["conditions"]["probe_atoms"]["n_averaged"] == 250


def test_empty_probe_is_flagged(tmp_path):
    p = tmp_path / "ev.csv"
    rows = "".join(f"{100000 + 37 * k:.1f},{k % 3},1,0\n" for k in range(50))
    p.write_text("t_ns,cycle_id,atoms,probe_on\n" + rows)
    assert run("analyze", p, "--out", tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["eta"] is None
    assert any("empty probe" in f for f in rep["flags"])
    assert rep["snr"]["integrated"] is None


@pytest.mark.parametrize("body", [
    "t_ns,cycle_id,atoms,probe_on\n250000.0,0,1,0\n",
    "t_ns,cycle_id,atoms,probe_on\n5.0,0,1\n",
    "t,c,a,p\n",
])
def test_malformed_events_exit_2(tmp_path, body, capsys):
    p = tmp_path / "ev.csv"
    p.write_text(body)
    assert run("analyze", p, "--out", tmp_path) == EXIT_CONFIG
    assert "stoplight: input error" in capsys.readouterr().err


def test_config_errors_exit_2(tmp_path):
    assert run("simulate", "--out", tmp_path, "--set", "controls.rabi_plus=3.6") == EXIT_CONFIG
    assert run("simulate", "--out", tmp_path, "--set", "controls.bogus=1") == EXIT_CONFIG
    assert run("simulate", "--out", tmp_path, "--config", tmp_path / "nope.toml") == EXIT_CONFIG
    assert run("analyze", tmp_path / "missing.csv", "--out", tmp_path) == EXIT_CONFIG
    assert run("no-such-command") == EXIT_CONFIG
    assert run("generate-events", "--run", tmp_path / "empty", "--out", tmp_path) == EXIT_CONFIG


def test_fit_birefringence_reference_dataset(tmp_path):
    path = DATA.joinpath("reference_fiber.csv")
    assert run("fit-birefringence", path, "--phi-seed", 167.2, "--fiber-length", "22 cm", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["phi"] == pytest.approx(164.84, abs=1e-5)
    assert rep["chi"] == pytest.approx(0.50, abs=1e-5)
    assert rep["beta"] == pytest.approx(0.15, abs=1e-5)
    assert rep["fiber_length_m"] == pytest.approx(0.22)
    assert (tmp_path / "fit.svg").exists() and (tmp_path / "fit.csv").exists()


def test_fit_birefringence_synthetic_dataset(tmp_path):
    path = DATA.joinpath("synthetic_fiber.csv")
    assert run("fit-birefringence", path, "--phi-seed", 52, "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    err = rep["errors"]
    for k, truth in (("phi", 52.70), ("chi", 0.35), ("beta", -0.42)):
        assert abs(rep[k] - truth) < 3 * err[k]


def test_fit_birefringence_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("theta_deg,dop\n10,abc\n")
    assert run("fit-birefringence", bad, "--phi-seed", 5, "--out", tmp_path) == EXIT_CONFIG
    bad.write_text("angle,value\n10,0.5\n")
    assert run("fit-birefringence", bad, "--phi-seed", 5, "--out", tmp_path) == EXIT_CONFIG
    bad.write_text("theta_deg,dop\n10,1.5\n")
    assert run("fit-birefringence", bad, "--phi-seed", 5, "--out", tmp_path) == EXIT_CONFIG
    # DOP alone cannot fix the sign of chi
    dop_only = tmp_path / "dop.csv"
    lines = ["theta_deg,dop"]
    for row in read_table_rows(DATA.joinpath("reference_fiber.csv")):
        lines.append(f"{row[0]},{row[1]}")
    dop_only.write_text("\n".join(lines) + "\n")
    assert run("fit-birefringence", dop_only, "--phi-seed", 167.2, "--out", tmp_path) == EXIT_FIT


def read_table_rows(path):
    body = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]
    return [ln.split(",") for ln in body[1:]]


def test_scan_file_input(tmp_path):
    from stoplight.jones import JonesParameters, degree_of_polarization, output_orientation

    params = JonesParameters(164.84, 0.5, 0.15)
    rng = np.random.default_rng(1)
    v = np.arange(0, 180, 10.0)
    lines = ["theta_in_deg,analyzer_deg,power_norm"]
    for th in np.arange(-90, 91, 10.0):
        t = np.radians(th)
        dop, tout = degree_of_polarization(params, t), output_orientation(params, t)
        y = 0.5 + 0.5 * dop * np.cos(2 * (np.radians(v) - tout)) + rng.normal(0, 1e-4, v.size)
        lines += [f"{th},{a},{p:.9f}" for a, p in zip(v, y)]
    p = tmp_path / "scan.csv"
    p.write_text("\n".join(lines) + "\n")
    assert run("fit-birefringence", p, "--phi-seed", 167.2, "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["n_points"] == 19
    for k, truth in (("phi", 164.84), ("chi", 0.5), ("beta", 0.15)):
        assert rep[k] == pytest.approx(truth, abs=1e-3)


def test_single_point_sweep_equals_simulate(tmp_path):
    over = ["--config", DATA.joinpath("slp.toml"), "--set", "solver.nz=64"]
    assert run("simulate", "--out", tmp_path / "sim", *over) == EXIT_OK
    assert run("sweep", "--out", tmp_path / "sw", *over, "--parameter", "controls.rabi_minus",
               "--values", "2.3 Gamma") == EXIT_OK
    sim = json.loads((tmp_path / "sim" / "summary.json").read_text())
    sw = read_table(tmp_path / "sw" / "sweep.csv")
    assert sw["eta"][0] == pytest.approx(sim["eta"], rel=1e-9)
    assert sw["ratio"][0] == pytest.approx(sim["ratio"], rel=1e-9)
    assert (tmp_path / "sw" / "sweep.svg").exists()


def test_sweep_ratio_and_errors(tmp_path):
    over = ["--config", DATA.joinpath("slp.toml"), "--set", "solver.nz=64", "--out", tmp_path]
    assert run("sweep", *over, "--parameter", "controls.rabi_minus", "--ratio", "--range", 0.6, 1.0, 3) == 0
    sw = read_table(tmp_path / "sweep.csv")
    assert np.allclose(sw["ratio"], [0.6, 0.8, 1.0], atol=1e-9)
    summ = json.loads((tmp_path / "sweep_summary.json").read_text())
    assert summ["n_runs"] == 3 and summ["as_ratio"]
    assert run("sweep", *over, "--parameter", "controls.nope", "--values", "1 Gamma") == EXIT_CONFIG
    assert run("sweep", *over, "--parameter", "medium.d_opt", "--ratio", "--values", "1") == EXIT_CONFIG
    assert run("sweep", *over, "--parameter", "schedule.mode", "--values", "lsr") == EXIT_CONFIG


def test_exit_code_constants():
    assert (EXIT_OK, EXIT_CONFIG, EXIT_FIT, EXIT_ANALYSIS) == (0, 2, 4, 5)


def test_version(capsys):
    assert run("--version") == 0
    assert "stoplight" in capsys.readouterr().out
