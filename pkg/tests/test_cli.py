import numpy as np
import pytest

import bilevelbench as bb
from bilevelbench import cli
from bilevelbench.verify import CheckResult

CFG = """\
[problem]
kind = quadratic
preset = q2
noise = gaussian
sigma_g1 = 0.05

[algorithm]
name = slip

[schedule]
mode = practical
alpha = 0.1
beta = 0.9
gamma = 0.1
eta = 0.01
T = 50
T0 = 5

[run]
seeds = 1,2
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(CFG)
    return p


def test_run_success(cfg_path, tmp_path, capsys):
    rc = cli.main(["run", "--config", str(cfg_path), "--out",
                   str(tmp_path / "out" / "exp")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "seed 1: OK" in out
    assert (tmp_path / "out" / "exp_seed1.csv").exists()
    assert (tmp_path / "out" / "exp_meta.json").exists()


def test_run_without_out_prefix(cfg_path, capsys):
    rc = cli.main(["run", "--config", str(cfg_path)])
    assert rc == 1


def test_bad_config_exit_1(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text(CFG.replace("name = slip", "name = slip\nsurprise = 1"))
    rc = cli.main(["run", "--config", str(p), "--out", str(tmp_path / "x")])
    assert rc == 1


def test_missing_config_exit_1(tmp_path):
    rc = cli.main(["run", "--config", str(tmp_path / "nope.cfg"),
                   "--out", str(tmp_path / "x")])
    assert rc == 1


def test_usage_error_exit_1():
    assert cli.main(["run"]) == 1
    assert cli.main(["frobnicate"]) == 1


@pytest.mark.filterwarnings("ignore::UserWarning")  # oversized alpha on purpose
def test_divergent_run_exit_2(tmp_path):
    p = tmp_path / "div.cfg"
    p.write_text(CFG.replace("alpha = 0.1", "alpha = 5.0")
                 .replace("gamma = 0.1", "gamma = 5.0")
                 .replace("T = 50", "T = 600"))
    rc = cli.main(["run", "--config", str(p), "--out", str(tmp_path / "d")])
    assert rc == 2


def test_verify_pass_exit_0(capsys):
    rc = cli.main(["verify", "--suite", "counts"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "PASS oracle-counts-main" in out


def test_verify_unknown_suite_exit_1():
    assert cli.main(["verify", "--suite", "bogus"]) == 1


def test_verify_fail_exit_3(monkeypatch, capsys):
    import bilevelbench.verify as verify

    monkeypatch.setitem(
        verify.SUITES, "counts",
        lambda: [CheckResult("forced-failure", False, "synthetic")])
    assert cli.main(["verify", "--suite", "counts"]) == 3
    assert "FAIL forced-failure" in capsys.readouterr().out


def test_plot_roundtrip(cfg_path, tmp_path, capsys):
    assert cli.main(["run", "--config", str(cfg_path), "--out",
                     str(tmp_path / "exp")]) == 0
    rc = cli.main(["plot", str(tmp_path / "exp_seed1.csv"),
                   str(tmp_path / "exp_seed2.csv"),
                   "--metric", "grad_norm", "-o", str(tmp_path / "c.svg")])
    assert rc == 0
    assert (tmp_path / "c.svg").exists()


def test_plot_unknown_metric_exit_1(cfg_path, tmp_path):
    assert cli.main(["run", "--config", str(cfg_path), "--out",
                     str(tmp_path / "exp")]) == 0
    rc = cli.main(["plot", str(tmp_path / "exp_seed1.csv"),
                   "--metric", "nope", "-o", str(tmp_path / "c.svg")])
    assert rc == 1


def test_sweep_outputs_summary(tmp_path, capsys):
    p = tmp_path / "sweep.cfg"
    p.write_text(CFG.replace(
        "mode = practical\nalpha = 0.1\nbeta = 0.9\ngamma = 0.1\n"
        "eta = 0.01\nT = 50\nT0 = 5",
        "mode = theorem41\neps = 0.1\ndelta = 0.1\ndelta0 = 1.0\n"
        "delta_y0 = 1.0\ndelta_z0 = 1.0").replace(
        "sigma_g1 = 0.05", "sigma_g1 = 0.1"))
    rc = cli.main(["sweep", "--config", str(p), "--eps", "0.2,0.1",
                   "--out", str(tmp_path / "sweep.csv")])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("eps,status,T")
    assert (tmp_path / "sweep.csv").read_text() == out
