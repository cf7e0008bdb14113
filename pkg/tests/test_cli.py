import json
import subprocess
import sys

import pytest

from minimax_es.harness.cli import main


def cli(*args, env=None):
    return subprocess.run([sys.executable, "-m", "minimax_es.harness.cli", *args],
                          capture_output=True, text=True, env=env)


def test_solve_is_deterministic():
    args = ("solve", "--problem", "L1", "--algo", "reckless:CR", "--fes", "2000", "--seed", "7")
    a, b = cli(*args), cli(*args)
    assert a.returncode == 0 and a.stdout == b.stdout
    rec = json.loads(a.stdout)
    assert rec["evaluations"] <= 2000 and rec["seed"] == 7 and "regret" in rec


def test_regret_command(capsys):
    assert main(["regret", "--problem", "L1", "--x", "0,0,0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["regret"] == pytest.approx(75.0)


@pytest.mark.parametrize("argv", [
    ["regret", "--problem", "L1", "--x", "0,0"], ["regret", "--problem", "L1", "--x", "20,0,0"],
    ["solve", "--problem", "L9"], ["solve", "--problem", "L1", "--algo", "reckless:ZZ"],
    ["solve", "--problem", "L1", "--params", "[1]"], ["bogus"], []])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err


def test_report_without_run(tmp_path, capsys):
    assert main(["report", "--kind", "cd", "--output", str(tmp_path)]) != 0
    assert "empty slice" in capsys.readouterr().err


def test_malformed_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{problems: L1")
    assert main(["run", "--config", str(bad), "--output", str(tmp_path)]) == 2
    bad.write_text(json.dumps({"problems": ["L1"], "runs": -1}))
    assert main(["run", "--config", str(bad), "--output", str(tmp_path)]) == 2


def test_run_then_report(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problems": ["L5", "L6"], "algorithms": ["coeva", "coevp"],
                               "budgets": [200], "runs": 2}))
    assert main(["run", "--config", str(cfg), "--output", str(tmp_path)]) == 0
    assert main(["report", "--kind", "cd", "--output", str(tmp_path)]) == 0
    assert (tmp_path / "reports" / "cd_200.json").exists()
    assert main(["report", "--kind", "convergence", "--output", str(tmp_path)]) == 0
    assert "convergence_L6.csv" in capsys.readouterr().out


def test_verify_exits_zero(capsys):
    assert main(["verify", "--points", "3"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS (") == 10 and "FAIL" not in out
