import json
import subprocess
import sys

import pytest

from heavytail.cli import build_parser, main


def _last_json(out):
    return json.loads(out.strip().splitlines()[-1])


def test_parser_has_every_subcommand():
    p = build_parser()
    for name in ("normalizers", "levy-accuracy", "harnack-sweep", "concentration", "maximal-domination", "zo-check",
                 "homspace-suite", "approx-identity", "run", "schema"):
        assert p.parse_args([name]).command == name


def test_schema_command(capsys):
    assert main(["schema"]) == 0
    assert "experiment" in json.loads(capsys.readouterr().out)["properties"]


def test_normalizers_pass(tmp_path, capsys):
    assert main(["normalizers", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "PASS  I(1,1) = pi" in out
    assert _last_json(out)["status"] == "pass"
    assert (tmp_path / "normalizers.csv").exists() and (tmp_path / "manifest.json").exists()


def test_quiet_prints_only_summary(tmp_path, capsys):
    assert main(["normalizers", "--out", str(tmp_path), "--quiet"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1 and json.loads(lines[0])["exit_code"] == 0


def test_run_with_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "harnack-sweep", "params": {"dims": [1], "sigmas": [1.0]}}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "4"]) == 0
    rep = json.loads((tmp_path / "o/report.json").read_text())
    assert rep["seed"] == 4
    assert (tmp_path / "o/certificates.json").exists()


def test_tol_flag_forwarded(tmp_path):
    # a tolerance below the float64 error of pi makes the exactness checks fail
    assert main(["normalizers", "--out", str(tmp_path), "--tol", "1e-30", "--quiet"]) == 1
    assert json.loads((tmp_path / "report.json").read_text())["tol"] == 1e-30


def test_unreadable_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["normalizers", "--config", str(bad)]) == 2
    assert main(["normalizers", "--config", str(tmp_path / "missing.json")]) == 2
    bad.write_text("[1, 2]")
    assert main(["normalizers", "--config", str(bad)]) == 2


def test_schema_violation_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "normalizers", "bogus": 1}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert _last_json(capsys.readouterr().out)["status"] == "config-error"


def test_subcommand_mismatch_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "zo-check"}))
    assert main(["normalizers", "--config", str(cfg)]) == 2
    assert "subcommand" in _last_json(capsys.readouterr().out)["message"]


def test_refusal_exits_3(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "concentration",
                               "params": {"selection": {"kind": "log_power", "alpha": 1.0}}}))
    assert main(["concentration", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert _last_json(capsys.readouterr().out)["status"] == "refused"


def test_env_overrides(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("HEAVYTAIL_OUT", str(tmp_path / "env"))
    monkeypatch.setenv("HEAVYTAIL_THREADS", "3")
    assert main(["normalizers", "--quiet"]) == 0
    rep = json.loads((tmp_path / "env/report.json").read_text())
    assert rep["threads"] == 3
    # flags win over the environment
    assert main(["normalizers", "--quiet", "--out", str(tmp_path / "flag"), "--threads", "2"]) == 0
    assert json.loads((tmp_path / "flag/report.json").read_text())["threads"] == 2


def test_bad_thread_env_exits_2(monkeypatch, capsys):
    monkeypatch.setenv("HEAVYTAIL_THREADS", "many")
    assert main(["normalizers"]) == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "heavytail.cli", "normalizers", "--quiet", "--out", str(tmp_path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert _last_json(proc.stdout)["experiment"] == "normalizers"


@pytest.mark.slow
def test_homspace_suite_cli(tmp_path, capsys):
    assert main(["homspace-suite", "--out", str(tmp_path), "--threads", "4"]) == 0
    rep = json.loads((tmp_path / "homspace.json").read_text())
    assert rep["annulus_gapped"]["index"] > 3
