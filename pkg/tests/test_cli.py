import csv
import json

import numpy as np
import pytest

from bondgauge.cli import main
from bondgauge.config import load_config
from bondgauge.errors import ConfigError
from bondgauge.model import TYPICAL_THETA, phase_response


@pytest.fixture(autouse=True)
def _no_env_threads(monkeypatch):
    monkeypatch.delenv("BONDGAUGE_THREADS", raising=False)


def _read_phase(path):
    rows = list(csv.DictReader(open(path)))
    return np.array([float(r["omega_hz"]) for r in rows]), np.array([float(r["phase_deg"]) for r in rows])


def test_default_config_profiles():
    cfg = load_config()
    assert cfg.profile == "typical"
    assert cfg.theta_true == TYPICAL_THETA
    assert cfg.with_profile("boundary").theta_true.alpha0 == pytest.approx(9999.9)
    assert cfg.experiment.grid.n == 100
    with pytest.raises(ConfigError):
        cfg.with_profile("nope")


def test_config_rejects_unknown_keys_and_bad_values(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"bond": {"slope": 2}}))
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text(json.dumps({"experiment": {"alpha": 0.01, "eta": 0.02}}))
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


def test_simulate_noiseless_and_repeatable(tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert main(["simulate", "--sigma", "0", "--out", str(out)]) == 0
    assert "log_k0=14.85" in capsys.readouterr().out
    hz, ph = _read_phase(out)
    np.testing.assert_array_equal(ph, phase_response(TYPICAL_THETA))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["simulate", "--sigma", "5.74", "--seed", "3", "--out", str(a)])
    main(["simulate", "--sigma", "5.74", "--seed", "3", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()
    assert len(_read_phase(a)[0]) == 100


def test_interval_reports(tmp_path, capsys):
    data = tmp_path / "p.csv"
    main(["simulate", "--sigma", "0", "--out", str(data)])
    capsys.readouterr()
    out = tmp_path / "r.json"
    assert main(["interval", "--data", str(data), "--alpha", "0.05", "--eta", "0.01", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["gamma"] == pytest.approx(0.04 / 0.99, rel=1e-12)
    si = rep["stiffness_interval"]
    assert si["lower"] <= 14.85 <= si["upper"]
    assert {"nls_residual", "q", "solver_iters"} <= set(rep["diagnostics"])
    assert rep["bond_interval"] is None

    assert main(["interval", "--data", str(data), "--method", "ls", "--out", str(out)]) == 0
    ls = json.loads(out.read_text())["stiffness_interval"]
    assert 10.0 <= ls["lower"] <= ls["upper"] <= 20.0


def test_interval_with_pairs_and_propagate(tmp_path, capsys):
    data = tmp_path / "p.csv"
    main(["simulate", "--sigma", "2", "--seed", "1", "--out", str(data)])
    pairs = tmp_path / "pairs.csv"
    x = np.linspace(13, 17, 30)
    z = 1.573 * x + 0.63 * np.random.default_rng(0).normal(size=30)
    pairs.write_text("x,z\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(x.tolist(), z.tolist())))
    capsys.readouterr()
    assert main(["interval", "--data", str(data), "--pairs", str(pairs)]) == 0
    rep = json.loads(capsys.readouterr().out)
    bi, si = rep["bond_interval"], rep["stiffness_interval"]
    assert bi["lower"] < bi["upper"]
    assert bi["level"] == pytest.approx(0.95, rel=1e-12)
    assert bi["method"] == "propagated" and si["method"] == "ssb"

    assert main(["propagate", "--pairs", str(pairs), "--lower", "14", "--upper", "15"]) == 0
    prop = json.loads(capsys.readouterr().out)
    assert prop["bond_interval"]["lower"] < 1.573 * 14 and prop["bond_interval"]["upper"] > 1.573 * 15


def test_exit_codes(tmp_path, capsys):
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text(json.dumps({"box": {"lower": {"log_k0": 25}}}))
    assert main(["simulate", str(bad_cfg), "--sigma", "1", "--out", str(tmp_path / "x.csv")]) == 2

    # writing into a path whose parent is a regular file fails
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["simulate", "--sigma", "1", "--out", str(blocker / "x.csv")]) == 3

    short = tmp_path / "short.csv"
    short.write_text("omega_hz,phase_deg\n1e6,1.0\n2e6,2.0\n")
    assert main(["interval", "--data", str(short)]) == 4

    data = tmp_path / "p.csv"
    main(["simulate", "--sigma", "0", "--out", str(data)])
    assert main(["interval", "--data", str(data), "--alpha", "0.01", "--eta", "0.05"]) == 2
    assert main(["propagate", "--pairs", str(tmp_path / "missing.csv"), "--lower", "1", "--upper", "2"]) == 2


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    from bondgauge import cli
    from bondgauge.errors import SolverStall

    def stall(*args, **kwargs):
        raise SolverStall("multiplier search stalled", {"steps": 300})

    data = tmp_path / "p.csv"
    main(["simulate", "--sigma", "1", "--out", str(data)])
    monkeypatch.setattr(cli, "ssb_from_linearization", stall)
    assert main(["interval", "--data", str(data)]) == 5


def test_experiment_outputs_and_determinism(tmp_path, monkeypatch):
    args = ["experiment", "coverage", "--replications", "4", "--seed", "5", "--threads", "1"]
    assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("BONDGAUGE_THREADS", "2")
    assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
    for name in ("coverage.csv", "coverage_plot.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "a" / "coverage.csv")))
    assert len(rows) == 6


def test_contraction_emits_one_row_per_exponent(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": {"methods": ["ssb"]}}))
    assert main(["experiment", "contraction", str(cfg), "--replications", "1",
                 "--max-exponent", "10", "--out-dir", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "contraction.csv")))
    assert [int(r["exponent"]) for r in rows] == list(range(10))
