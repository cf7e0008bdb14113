import csv
import json

import numpy as np
import pytest

from minimax_es.harness.reports import (EmptyReportError, cd_summary, convergence_rows,
                                        emit_reports, rank_matrix, scalability_rows)
from minimax_es.harness.stats import friedman_test, nemenyi_cd


def rec(problem, algorithm, budget, seed, regret):
    return {"key": f"{problem}|{algorithm}|{budget}|{seed}", "problem": problem,
            "algorithm": algorithm, "budget": budget, "seed": seed, "regret": regret}


def read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def synthetic(seed=0, problems=6, algos=4, runs=3, budgets=(1000, 100)):
    rng = np.random.default_rng(seed)
    return [rec(f"L{p + 1}", f"algo{a}", b, s, float(rng.integers(0, 4) + a))
            for p in range(problems) for a in range(algos) for b in budgets for s in range(runs)]


def test_single_run(tmp_path):
    [path] = emit_reports([rec("L1", "mmde", 1000, 0, 0.25)], "convergence", tmp_path)
    [row] = read(path)
    assert float(row["mean_regret"]) == float(row["median"]) == 0.25
    assert float(row["std"]) == 0.0 and row["runs"] == "1"


def test_rows_sorted_by_budget_and_match_recomputation(tmp_path):
    records = synthetic()
    paths = emit_reports(records, "convergence", tmp_path)
    assert len(paths) == 6
    rows = read(tmp_path / "convergence_L3.csv")
    budgets = [int(r["budget"]) for r in rows]
    assert budgets == sorted(budgets)
    for r in rows:
        raw = [x["regret"] for x in records if x["problem"] == "L3" and x["algorithm"] == r["algorithm"]
               and x["budget"] == int(r["budget"])]
        assert float(r["mean_regret"]) == np.mean(raw) and float(r["std"]) == np.std(raw)


def test_cd_report_reproduces_statistics(tmp_path):
    records = synthetic(1)
    emit_reports(records, "cd", tmp_path)
    s = json.loads((tmp_path / "cd_1000.json").read_text())
    rm = rank_matrix(records)
    stat, p = friedman_test(rm)
    assert s["friedman_statistic"] == stat and s["p_value"] == p
    assert s["cd"] == nemenyi_cd(4, 6, 0.05)
    ranks = {r["algorithm"]: float(r["average_rank"]) for r in read(tmp_path / "cd_1000.csv")}
    assert ranks == pytest.approx(dict(zip(rm.algorithms, rm.average_ranks)))
    assert len(read(tmp_path / "cd_1000_pairs.csv")) == 6


def test_cd_uses_requested_budget():
    records = synthetic(2)
    assert cd_summary(records, budget=100)["budget"] == 100
    assert cd_summary(records)["budget"] == 1000


def test_scalability_rows():
    records = [rec("L1-n2", "mmde", 20_000, 0, 1.0), rec("L1-n50", "mmde", 500_000, 0, 3.0),
               rec("L1", "mmde", 30_000, 0, 2.0), rec("L4", "mmde", 1000, 0, 9.0)]
    rows = scalability_rows(records)
    assert list(rows) == ["L1"] and [r[0] for r in rows["L1"]] == [2, 3, 50]


def test_variants_only_reckless(tmp_path):
    records = [rec("L1", "reckless:CR", 100, 0, 1.0), rec("L1", "mmde", 100, 0, 2.0)]
    [path] = emit_reports(records, "variants", tmp_path)
    assert [r["algorithm"] for r in read(path)] == ["reckless:CR"]


@pytest.mark.parametrize("kind", ["convergence", "scalability", "variants", "cd"])
def test_empty_slice(tmp_path, kind):
    with pytest.raises(EmptyReportError):
        emit_reports([], kind, tmp_path)


def test_cd_needs_two_covered_problems(tmp_path):
    with pytest.raises(EmptyReportError):
        emit_reports([rec("L1", "a", 100, 0, 1.0), rec("L1", "b", 100, 0, 2.0)], "cd", tmp_path)


def test_unknown_kind(tmp_path):
    with pytest.raises(ValueError):
        emit_reports(synthetic(), "histogram", tmp_path)


def test_convergence_groups():
    rows = convergence_rows([rec("L2", "a", 100, s, float(s)) for s in range(4)])
    assert rows == {"L2": [(100, "a", 1.5, float(np.std([0, 1, 2, 3])), 1.5, 4)]}
