import json

import numpy as np
import pytest

from minimax_es.harness.experiment import (RESULTS_FILE, AlgorithmSpec, ConfigError, ExperimentConfig,
                                           ResultStore, canonical_algorithm, parse_algorithm,
                                           run_experiment, run_key, run_rng, solve)
from minimax_es.oracle import OracleConfig, RegretOracle

LIGHT = OracleConfig(cma_restarts=1, cma_evals_per_restart=300, de_evals=300, local_starts=3,
                     grid_points_1d=10 ** 4, grid_points_2d=10 ** 4)


def small(tmp_path, **kw):
    d = dict(problems=["L5"], algorithms=["reckless:CR"], budgets=[200, 500], runs=3,
             output_dir=str(tmp_path))
    d.update(kw)
    return ExperimentConfig.from_dict(d)


def test_cardinality_and_idempotence(tmp_path):
    cfg = small(tmp_path)
    s = run_experiment(cfg, RegretOracle(LIGHT))
    assert (s.completed, s.skipped, s.failed) == (6, 0, 0)
    recs = ResultStore(tmp_path / RESULTS_FILE).records()
    assert len(recs) == 6 and len({r["key"] for r in recs}) == 6
    again = run_experiment(cfg, RegretOracle(LIGHT))
    assert (again.completed, again.skipped) == (0, 6)
    assert len(ResultStore(tmp_path / RESULTS_FILE).records()) == 6


def test_records_fields_and_budget(tmp_path):
    run_experiment(small(tmp_path, runs=1), RegretOracle(LIGHT))
    for r in ResultStore(tmp_path / RESULTS_FILE).records():
        assert r["evaluations"] <= r["budget"]
        assert r["regret"] >= -1e-6 and r["worst_case"] >= r["value"] - 1e-9
        assert r["key"] == run_key(r["problem"], r["algorithm"], r["budget"], r["seed"])


def test_sweeps_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment(small(a, algorithms=["mmde", "coevp"], budgets=[300]), RegretOracle(LIGHT))
    run_experiment(small(b, algorithms=["mmde", "coevp"], budgets=[300]), RegretOracle(LIGHT))
    assert (a / RESULTS_FILE).read_bytes() == (b / RESULTS_FILE).read_bytes()


def test_budgets_use_independent_streams():
    draws = {b: run_rng("L1", "reckless:CR", b, 0).random(4).tolist() for b in (1000, 100_000)}
    assert draws[1000] != draws[100_000]
    assert run_rng("L1", "mmde", 1000, 0).random() != run_rng("L1", "coeva", 1000, 0).random()
    assert run_rng("L1", "mmde", 1000, 0).random() == run_rng("L1", "mmde", 1000, 0).random()


def test_small_budget_run_is_not_a_truncation():
    spec = AlgorithmSpec("reckless:CR")
    short, long = solve("L1", spec, 1000, 0), solve("L1", spec, 10_000, 0)
    assert short.evaluations <= 1000
    assert not any(np.array_equal(short.history[0].x, h.x) for h in long.history)


def test_failures_are_isolated(tmp_path, caplog):
    cfg = small(tmp_path, algorithms=["reckless:CR", {"id": "mmde", "params": {"bogus": 1}}],
                budgets=[300], runs=1)
    s = run_experiment(cfg, RegretOracle(LIGHT))
    assert (s.completed, s.failed) == (1, 1)
    assert "failed" in caplog.text


def test_output_env(tmp_path, monkeypatch):
    monkeypatch.setenv("MINIMAX_ES_OUTPUT", str(tmp_path / "env"))
    assert ExperimentConfig(problems=["L1"]).out == tmp_path / "env"


@pytest.mark.parametrize("bad", [
    {"runs": 0}, {"budgets": [1000, 100]}, {"problems": ["L9"]}, {"colour": "red"},
    {"algorithms": ["reckless:QQ"]}, {"algorithms": ["sgd"]}])
def test_config_errors(tmp_path, bad):
    with pytest.raises(ValueError):
        small(tmp_path, **bad)


def test_load_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"problems": ["L1"], "algorithms": [{"id": "coeva"}], "budgets": [100]}))
    cfg = ExperimentConfig.load(path)
    assert cfg.runs == 60 and cfg.algorithms[0].label == "coeva" and list(cfg.seeds())[-1] == 59
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(path)


def test_algorithm_ids():
    assert parse_algorithm("reckless:cr") == ("reckless", "CR")
    assert canonical_algorithm("reckless") == "reckless:CR"
    assert AlgorithmSpec("mmde", {"F": 0.5, "CR": 0.9}).label == "mmde[CR=0.9,F=0.5]"
