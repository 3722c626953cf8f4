"""Tests for the batch front-end: config parsing, dispatch, reports."""

import json
import os

import pytest

from conewolff import cli
from conewolff.errors import ConfigError


def _cfg_text(**kv):
    lines = [f"{k} = {v}" for k, v in kv.items()]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# config parsing and validation
# ---------------------------------------------------------------------------


def test_parse_config_happy_path():
    text = (
        "# a comment\n"
        "[main]\n"
        "experiment = geometry\n"
        "curve = helix(1,1)\n"
        "samples = 20   # trailing comment\n"
        "deltas = 0.0625,0.03125\n"
        "k_list = 4,5\n"
        "custom_note = hello\n"
    )
    cfg = cli.parse_config(text)
    assert cfg.experiment == "geometry"
    assert cfg.curve == "helix(1,1)"
    assert cfg.samples == 20
    assert cfg.deltas == (0.0625, 0.03125)
    assert cfg.k_list == (4, 5)
    assert cfg.extras["custom_note"] == "hello"
    assert cfg.raw_text == text


def test_parse_config_diagnostics():
    with pytest.raises(ConfigError, match="line 2"):
        cli.parse_config("experiment = geometry\nnot a kv pair\n")
    with pytest.raises(ConfigError, match="line 2.*samples"):
        cli.parse_config("experiment = geometry\nsamples = many\n")
    with pytest.raises(ConfigError, match="experiment"):
        cli.parse_config("samples = 5\n")
    with pytest.raises(ConfigError, match="unknown experiment"):
        cli.parse_config("experiment = frobnicate\n")


def test_validate_scale_constraints():
    with pytest.raises(ConfigError, match="sigma"):
        cli.parse_config(_cfg_text(experiment="plates", deltas="0.0625",
                                   sigma=0.5))
    with pytest.raises(ConfigError, match="theta"):
        cli.parse_config(_cfg_text(experiment="plates", deltas="0.25",
                                   theta=0.1))
    with pytest.raises(ConfigError, match="k/3"):
        cli.parse_config(_cfg_text(experiment="decompose", k=6, l=4))
    with pytest.raises(ConfigError, match="power of two"):
        cli.parse_config(_cfg_text(experiment="sobolev", n=48))


# ---------------------------------------------------------------------------
# listing and selftest
# ---------------------------------------------------------------------------


def test_list_experiments_contents_and_stability():
    out = cli.list_experiments()
    assert "decouple §2" in out
    assert "umu §4" in out
    for name in ("geometry", "plates", "decompose", "umu", "census",
                 "schedule", "decouple", "sobolev", "smoothing", "maximal",
                 "helix2"):
        assert name in out
    assert out == cli.list_experiments()


def test_selftest_passes():
    assert cli.selftest() == 0


# ---------------------------------------------------------------------------
# run dispatch and reports
# ---------------------------------------------------------------------------


def _run_to(tmp_path, monkeypatch, text):
    monkeypatch.setenv("OUTPUT_DIR", str(tmp_path))
    cfg = cli.parse_config(text)
    code = cli.run(cfg)
    dirs = sorted(tmp_path.iterdir())
    return code, dirs


def test_run_geometry_reports(tmp_path, monkeypatch):
    code, dirs = _run_to(tmp_path, monkeypatch, _cfg_text(
        experiment="geometry", curve="helix(1,1)", samples=40))
    assert code == 0
    (run_dir,) = dirs
    for name in ("report.json", "data.csv", "config.echo", "metadata.json"):
        assert (run_dir / name).exists()
    assert (run_dir / "plots").is_dir()
    rep = json.loads((run_dir / "report.json").read_text())
    assert abs(rep["kappa_min"] - 0.5) <= 1e-8
    assert abs(rep["kappa_max"] - 0.5) <= 1e-8
    assert abs(rep["tau_min"] - 0.5) <= 1e-8
    rows = (run_dir / "data.csv").read_text().strip().splitlines()
    assert rows[0] == "s,kappa,tau"
    assert len(rows) == 41


def test_run_schedule_n_star(tmp_path, monkeypatch):
    code, dirs = _run_to(tmp_path, monkeypatch, _cfg_text(
        experiment="schedule", p=74, eps=0.1, k=20, eps0=0.3, M=10))
    assert code == 0
    rep = json.loads((dirs[0] / "report.json").read_text())
    assert rep["n_star"] == 8
    assert rep["hypothesis_ok"] is True


def test_run_reports_byte_identical(tmp_path, monkeypatch):
    text = _cfg_text(experiment="decompose", curve="helix(0.5,0.5)",
                     k=10, samples=50, seed=7)
    code1, _ = _run_to(tmp_path, monkeypatch, text)
    code2, dirs = _run_to(tmp_path, monkeypatch, text)
    assert code1 == code2 == 0
    assert len(dirs) == 2
    a = (dirs[0] / "report.json").read_bytes()
    b = (dirs[1] / "report.json").read_bytes()
    assert a == b
    # the echoed config is the verbatim input
    assert (dirs[0] / "config.echo").read_text() == text


def test_run_invalid_config_exit_code(tmp_path, monkeypatch):
    monkeypatch.setenv("OUTPUT_DIR", str(tmp_path))
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text(_cfg_text(experiment="plates", deltas="0.0625",
                                  sigma=0.9))
    assert cli.main(["run", str(cfg_file)]) == 1
    assert cli.main(["run", str(tmp_path / "missing.cfg")]) == 1


def test_run_assertion_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setenv("OUTPUT_DIR", str(tmp_path))
    cfg = cli.parse_config(_cfg_text(experiment="umu", samples=10))
    monkeypatch.setattr(
        cli.si, "verify_umu_approximation",
        lambda *a, **kw: {"pass": False, "max_ratio_one": 9.9,
                          "max_ratio_two": 9.9, "n_samples": 10,
                          "r0": 0.0625, "M": 10.0})
    assert cli.run(cfg) == 2


def test_main_list_and_selftest(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    assert "umu §4" in out
    assert cli.main(["selftest"]) == 0


def test_run_umu_small(tmp_path, monkeypatch):
    code, dirs = _run_to(tmp_path, monkeypatch, _cfg_text(
        experiment="umu", curve="helix(0.5,0.5)", samples=200))
    assert code == 0
    rep = json.loads((dirs[0] / "report.json").read_text())
    assert rep["pass"] is True
    assert rep["max_ratio_one"] <= 0.05


def test_run_helix2(tmp_path, monkeypatch):
    code, dirs = _run_to(tmp_path, monkeypatch, _cfg_text(
        experiment="helix2", samples=500, seed=1))
    assert code == 0
    rep = json.loads((dirs[0] / "report.json").read_text())
    assert rep["phase_identity_max_err"] <= 1e-12
