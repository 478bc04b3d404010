import json
import subprocess
import sys

import pytest

from qrnscale.cli import main
from qrnscale.experiments import read_csv_records


def test_evaluate_stdout(capsys):
    assert main(["evaluate", "--n-links", "1", "--d", "0"]) == 0
    (rec,) = read_csv_records(capsys.readouterr().out)
    assert rec["feasible"] and rec["e2e_rate"] == 1e5


def test_evaluate_infeasible_exit(capsys):
    assert main(["evaluate", "--n-links", "1", "--d", "10"]) == 2
    (rec,) = read_csv_records(capsys.readouterr().out)
    assert rec["reason"] == "rate_below_min"


def test_optimize_json(tmp_path):
    out = tmp_path / "opt.json"
    assert main(["optimize", "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["records"][0]["objective_km"] == pytest.approx(137.28)


def test_optimize_no_feasible(capsys):
    assert main(["optimize", "--set", "qos.f_min=0.999"]) == 2


def test_optimize_genetic_seed(capsys):
    assert main(["optimize", "--method", "genetic", "--seed", "3", "--set", "ga.generations_max=30"]) == 0
    (rec,) = read_csv_records(capsys.readouterr().out)
    assert rec["method"] == "genetic" and rec["seed"] == 3


def test_sweep_with_config(tmp_path):
    cfg = tmp_path / "s.yaml"
    cfg.write_text("scenario: sweep_qos\ngrid:\n  f_min: [0.5, 0.6]\n")
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--threads", "2"]) == 0
    assert len(read_csv_records(out.read_text())) == 2
    assert (tmp_path / "s.summary.json").exists()


def test_set_grid_override(tmp_path, capsys):
    cfg = tmp_path / "s.yaml"
    cfg.write_text("scenario: sweep_qos\n")
    assert main(["sweep", "--config", str(cfg), "--set", "grid.r_min=[1, 10, 100]"]) == 0
    assert len(read_csv_records(capsys.readouterr().out)) == 3


@pytest.mark.parametrize("argv", [
    ["sweep"],
    ["evaluate", "--d", "1"],
    ["optimize", "--set", "qos.f_min=2"],
    ["optimize", "--set", "nonsense"],
    ["sweep", "--config", "/definitely/not/here.yaml"],
])
def test_invalid_spec_exit(argv, capsys):
    assert main(argv) == 1


def test_bad_yaml(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("scenario: [unclosed\n")
    assert main(["sweep", "--config", str(cfg)]) == 1


def test_io_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["optimize", "--out", str(blocker / "sub" / "x.csv")]) == 3


def test_oracle_check(capsys):
    assert main(["oracle-check", "--set", "bounds.n_max=15", "--trials", "2000"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 10 and "FAIL" not in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qrnscale", "evaluate", "--n-links", "2", "--d", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.startswith("scenario,")
