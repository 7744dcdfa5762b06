import csv
import json

import numpy as np
import pytest

from inls.cli import EXIT_FAIL, EXIT_OK, EXIT_PARAM, main
from inls.config import load_config
from inls.runner import SWEEP_COLUMNS, build_initial, output_root, run_dir, run_evolve


def _only_dir(root):
    (d,) = [p for p in root.iterdir() if p.is_dir()]
    return d


def test_ground_state_preset(tmp_path, capsys):
    assert main(["ground-state", "--preset", "paper-3d", "--out", str(tmp_path)]) == EXIT_OK
    d = _only_dir(tmp_path)
    summary = json.loads((d / "summary.json").read_text())
    assert summary["status"] == "converged"
    head = summary["header"]
    assert head["residual"] < 1e-8 and head["ME"] > 0 and head["MK"] > 0
    assert (d / "profile.csv").read_text().startswith("# {")
    assert "Q0 =" in capsys.readouterr().out


def test_ground_state_soliton(tmp_path):
    assert main(["ground-state", "--preset", "soliton-1d", "--out", str(tmp_path)]) == EXIT_OK
    d = _only_dir(tmp_path)
    data = np.loadtxt(d / "profile.csv", delimiter=",", skiprows=2)
    assert np.abs(data[:, 1] - np.sqrt(2) / np.cosh(data[:, 0])).max() <= 1e-8
    assert json.loads((d / "summary.json").read_text())["header"]["ME"] is None


def test_invalid_regime_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[model]\nb = 2.5\n")
    assert main(["ground-state", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_PARAM
    assert "error:" in capsys.readouterr().err


def test_unknown_preset_exit_code(tmp_path):
    assert main(["evolve", "--preset", "nope", "--out", str(tmp_path)]) == EXIT_PARAM


def test_evolve_writes_artifacts(tmp_path):
    cfg = tmp_path / "small.ini"
    cfg.write_text("[grid]\npoints = 32\nhalf_width = 8\n[time]\ndt = 0.01\nT = 0.1\n"
                   "log_every = 2\n[initial]\namplitude = 0.5\n"
                   "[diagnostics]\nradii = 1, 2\nvirial_R = 4\n")
    assert main(["evolve", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    d = _only_dir(tmp_path)
    with open(d / "diagnostics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6 and "morawetz@2" in rows[0]
    summary = json.loads((d / "summary.json").read_text())
    assert summary["status"] == "completed" and summary["classification"] == "below_threshold"
    assert summary["mass_drift"] < 1e-12
    assert not any(k.startswith("_") for k in summary)


def test_verify_exit_codes(tmp_path):
    cfg = tmp_path / "v.ini"
    cfg.write_text("[verify]\nsuites = scaling-covariance\nscaling-covariance.points = 32\n")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "a")]) == EXIT_OK
    report = json.loads((_only_dir(tmp_path / "a") / "report.json").read_text())
    assert report["passed"] and report["suites"][0]["measured"]["relative_l2"] < 1e-6
    cfg.write_text("[verify]\nsuites = scaling-covariance\nscaling-covariance.tol = 1e-20\n"
                   "scaling-covariance.points = 32\n")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "b")]) == EXIT_FAIL


def test_verify_suite_flag(tmp_path, capsys):
    cfg = tmp_path / "v.ini"
    cfg.write_text("[verify]\ncommutator.seeds = 0\n")
    assert main(["verify", "--config", str(cfg), "--suite", "commutator",
                 "--out", str(tmp_path)]) == EXIT_OK
    assert "PASS commutator" in capsys.readouterr().out


def test_verify_without_suites(tmp_path):
    assert main(["verify", "--out", str(tmp_path)]) == EXIT_PARAM


def test_sweep(tmp_path):
    code = main(["sweep", "--preset", "paper-3d", "--p", "2.5,3", "--b", "0.5",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    with open(_only_dir(tmp_path) / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["p"] for r in rows] == ["2.5", "3.0"]
    assert list(rows[0]) == SWEEP_COLUMNS
    assert all(r["status"] == "converged" for r in rows)


def test_sweep_records_failures(tmp_path):
    code = main(["sweep", "--preset", "paper-3d", "--p", "2.5", "--b", "0.5,2.5",
                 "--out", str(tmp_path)])
    assert code == EXIT_FAIL
    with open(_only_dir(tmp_path) / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[1]["status"].startswith("ParameterError")


def test_output_root_and_run_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("INLS_OUT", str(tmp_path / "env"))
    assert output_root() == tmp_path / "env"
    assert output_root(tmp_path / "x") == tmp_path / "x"
    a, b = run_dir(tmp_path, "r"), run_dir(tmp_path, "r")
    assert a.name == "r" and b.name == "r-2"


@pytest.mark.parametrize("kind,extra", [
    ("gaussian", {}),
    ("offset_gaussian", {"center": "1, 0, 0"}),
    ("boosted_gaussian", {"velocity": "1, 0, 0"}),
    ("random", {"amplitude": "0.2"}),
])
def test_build_initial_kinds(kind, extra):
    cfg = load_config(overrides={"grid": {"points": "16", "half_width": "4"},
                                 "initial": {"kind": kind, **extra}})
    u = build_initial(cfg)
    assert u.grid == cfg.grid and np.all(np.isfinite(u.values))


@pytest.mark.parametrize("kind", ["offset_gaussian", "boosted_gaussian"])
def test_build_initial_missing_keys(kind):
    from inls.errors import ConfigurationError
    cfg = load_config(overrides={"grid": {"points": "16"}, "initial": {"kind": kind}})
    with pytest.raises(ConfigurationError):
        build_initial(cfg)


def test_random_initial_is_seeded():
    cfg = load_config(overrides={"grid": {"points": "16"}, "initial": {"kind": "random"}})
    a = build_initial(cfg).values
    assert np.array_equal(a, build_initial(cfg).values)
    other = load_config(overrides={"grid": {"points": "16"}, "initial": {"kind": "random"}},
                        seed=5)
    assert not np.array_equal(a, build_initial(other).values)


def test_nonradial_offset_preset(tmp_path):
    summary = run_evolve(load_config(preset="nonradial-offset"), tmp_path)
    assert summary["status"] == "completed"
    rows = list(csv.DictReader(open(tmp_path / "diagnostics.csv")))
    for R in ("2", "4", "8"):
        vals = [float(r[f"morawetz@{R}"]) for r in rows]
        assert min(vals) > 0
    assert set(summary["morawetz"]) == {"2", "4", "8"}
