"""Plot-ready CSV summaries of a result store.

Each aggregate is recomputed from the raw records on every call.
"""
from __future__ import annotations

import csv
import json
import re
from collections import defaultdict
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

from .stats import RankMatrix, friedman_test, nemenyi_cd, pairwise_significance

KINDS = ("convergence", "scalability", "variants", "cd")
SUMMARY_COLUMNS = ["algorithm", "mean_regret", "std", "median", "runs"]
_SCALED = re.compile(r"^(L[12])-n(\d+)$")


class EmptyReportError(ValueError):
    pass


def _summary(regrets) -> dict:
    r = np.asarray(regrets, dtype=float)
    return {"mean_regret": float(r.mean()), "std": float(r.std()),
            "median": float(np.median(r)), "runs": int(r.size)}


def _group(records, key):
    out = defaultdict(list)
    for rec in records:
        out[key(rec)].append(rec["regret"])
    return out


def _write(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def _dimension(problem_id: str):
    m = _SCALED.match(problem_id)
    if m:
        return m.group(1), int(m.group(2))
    if problem_id in ("L1", "L2"):
        return problem_id, 3
    return None


def convergence_rows(records) -> dict:
    """``{problem: [(budget, algorithm, mean, std, median, runs), ...]}`` sorted by budget."""
    groups = _group(records, lambda r: (r["problem"], r["budget"], r["algorithm"]))
    out = defaultdict(list)
    for (pid, budget, algo) in sorted(groups):
        s = _summary(groups[pid, budget, algo])
        out[pid].append((budget, algo, s["mean_regret"], s["std"], s["median"], s["runs"]))
    return dict(out)


def scalability_rows(records) -> dict:
    groups = defaultdict(list)
    for rec in records:
        d = _dimension(rec["problem"])
        if d is not None:
            groups[d[0], d[1], rec["budget"], rec["algorithm"]].append(rec["regret"])
    out = defaultdict(list)
    for (base, n, budget, algo) in sorted(groups):
        s = _summary(groups[base, n, budget, algo])
        out[base].append((n, budget, algo, s["mean_regret"], s["std"], s["median"], s["runs"]))
    return dict(out)


def rank_matrix(records, budget: Optional[int] = None) -> RankMatrix:
    """Mean regret per (problem, algorithm) at one budget (the largest by default).

    Only problems on which every algorithm has records are kept.
    """
    records = list(records)
    if not records:
        raise EmptyReportError("empty slice: no records")
    if budget is None:
        budget = max(r["budget"] for r in records)
    sel = [r for r in records if r["budget"] == budget]
    algos = sorted({r["algorithm"] for r in sel})
    groups = _group(sel, lambda r: (r["problem"], r["algorithm"]))
    problems = sorted(p for p in {r["problem"] for r in sel}
                      if all((p, a) in groups for a in algos))
    if len(algos) < 2 or len(problems) < 2:
        raise EmptyReportError(
            f"empty slice: need >= 2 algorithms and >= 2 fully covered problems at budget {budget}")
    values = [[float(np.mean(groups[p, a])) for a in algos] for p in problems]
    return RankMatrix(problems, algos, np.array(values))


def cd_summary(records, budget: Optional[int] = None, alpha: float = 0.05) -> dict:
    rm = rank_matrix(records, budget)
    stat, p = friedman_test(rm)
    return {"budget": budget if budget is not None else max(r["budget"] for r in records),
            "problems": list(rm.problems), "algorithms": list(rm.algorithms),
            "average_ranks": dict(zip(rm.algorithms, rm.average_ranks.tolist())),
            "friedman_statistic": stat, "p_value": p, "alpha": alpha,
            "cd": nemenyi_cd(len(rm.algorithms), len(rm.problems), alpha),
            "pairs": [{"a": a, "b": b, "rank_difference": d, "significant": s}
                      for a, b, d, s in pairwise_significance(rm, alpha)]}


def emit_reports(records: Iterable[dict], kind: str, out_dir, *,
                 budget: Optional[int] = None, alpha: float = 0.05) -> List[Path]:
    """Write the CSV files of one report kind and return their paths."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    records = [r for r in records if "regret" in r]
    out_dir = Path(out_dir)
    paths = []
    if kind == "convergence":
        for pid, rows in convergence_rows(records).items():
            paths.append(_write(out_dir / f"convergence_{pid}.csv", ["budget"] + SUMMARY_COLUMNS, rows))
    elif kind == "variants":
        sel = [r for r in records if r["algorithm"].startswith("reckless")]
        for pid, rows in convergence_rows(sel).items():
            paths.append(_write(out_dir / f"variants_{pid}.csv", ["budget"] + SUMMARY_COLUMNS, rows))
    elif kind == "scalability":
        for base, rows in scalability_rows(records).items():
            paths.append(_write(out_dir / f"scalability_{base}.csv",
                                ["dimension", "budget"] + SUMMARY_COLUMNS, rows))
    else:
        s = cd_summary(records, budget, alpha)
        tag = f"cd_{s['budget']}"
        paths.append(_write(out_dir / f"{tag}.csv", ["algorithm", "average_rank"],
                            sorted(s["average_ranks"].items(), key=lambda kv: kv[1])))
        paths.append(_write(out_dir / f"{tag}_pairs.csv",
                            ["algorithm_a", "algorithm_b", "rank_difference", "significant"],
                            [(p["a"], p["b"], p["rank_difference"], p["significant"])
                             for p in s["pairs"]]))
        summary = out_dir / f"{tag}.json"
        summary.write_text(json.dumps(s, indent=2, sort_keys=True) + "\n")
        paths.append(summary)
    if not paths:
        raise EmptyReportError(f"empty slice: no records for a {kind} report")
    return paths
