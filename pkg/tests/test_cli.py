import json
import os

import pytest

from stablebranch.cli import main


def run(tmp_path, capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_spectral_command(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "spectral", "--out", str(tmp_path / "o"),
                       "--override", "catalyst.mass=1.0")
    assert code == 0
    data = json.loads(out)
    assert data["closed_form"] == pytest.approx(-1.8247, abs=1e-3)
    assert abs(data["discrepancy"]) < 0.05
    status = json.loads((tmp_path / "o" / "status.json").read_text())
    assert status["complete"] and "spectral.json" in status["files"]


def test_config_errors_are_json(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("offspring: {0: 0.5, 2: 0.5}\nmotion: {alpha: 0.8}\n")
    code, _, err = run(tmp_path, capsys, "simulate", "--config", str(cfg))
    assert code != 0
    data = json.loads(err)
    assert data["error"] == "configuration" and len(data["violations"]) == 2


def test_unknown_command(tmp_path, capsys):
    code, _, err = run(tmp_path, capsys, "frobnicate")
    assert code != 0 and json.loads(err.strip().splitlines()[-1])["error"] == "usage"


def test_simulate_is_byte_identical(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code, _, _ = run(tmp_path, capsys, "simulate", "--reps", "2", "--seed", "11", "--out",
                         str(out), "--override", "horizon=5", "--override",
                         "record_lineage_max=true")
        assert code == 0
        outs.append(out)
    files = sorted(f for f in os.listdir(outs[0]) if f.endswith(".csv"))
    assert files == ["rep_00000.csv", "rep_00001.csv"]
    for f in files + ["rep_00000.json", "summary.json"]:
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
    assert json.loads((outs[0] / "status.json").read_text())["complete"]


def test_fk_estimate_command(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "fk-estimate", "--out", str(tmp_path / "f"),
                       "--override", "fk.n=400", "--override", "fk.times=[1, 2]")
    assert code == 0
    data = json.loads(out)
    assert len(data["estimates"]) == 2 and "log_slope" in data


def test_scan_command(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "scan", "--reps", "4", "--out", str(tmp_path / "s"),
                       "--override", "horizon=8", "--override", "catalyst.mass=0.6",
                       "--override", "experiment.deltas=[0.5, 2.0]")
    assert code == 0
    reports = json.loads((tmp_path / "s" / "reports.json").read_text())
    assert {r["observable"] for r in reports} == {"log_Lt", "log_Nt", "log_Nt_kappa"}
    assert (tmp_path / "s" / "ensemble.csv").exists()


def test_scan_without_growth_fails(tmp_path, capsys):
    code, _, err = run(tmp_path, capsys, "scan", "--reps", "2", "--out", str(tmp_path / "n"),
                       "--override", "catalyst={type: none}")
    assert code != 0 and json.loads(err)["error"] == "DomainError"
    status = json.loads((tmp_path / "n" / "status.json").read_text())
    assert not status["complete"]


def test_validate_quick(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "validate", "--quick", "--out", str(tmp_path / "v"))
    assert code == 0
    assert out.count("PASS") == 7
