"""Fixed-budget experiment sweeps with a line-delimited result store.

Every ``(problem, algorithm, budget, seed)`` cell is an independent run with
its own random stream, so a budget-1e3 record is never a truncation of a
budget-1e5 run.  Records hold only deterministic fields; wall times go to a
separate ``timings.jsonl`` so that repeated sweeps give byte-identical
result files.
"""
from __future__ import annotations

import json
import logging
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np

from ..coevolution import CoevConfig, run_coev_alternating, run_coev_parallel
from ..mmde import MmdeConfig, run_mmde
from ..oracle import OracleConfig, RegretOracle
from ..problems import get_problem
from ..reckless import RecklessConfig, resolve_variant, run_reckless
from ..records import RunTrace

log = logging.getLogger(__name__)

OUTPUT_ENV = "MINIMAX_ES_OUTPUT"
RESULTS_FILE = "results.jsonl"
TIMINGS_FILE = "timings.jsonl"
ORACLE_CACHE_FILE = "oracle_cache.jsonl"

DEFAULT_BUDGETS = (100, 1000, 10_000, 100_000)
DEFAULT_PROBLEMS = ("L1", "L2", "L3", "L4", "L5", "L6")
SCALING_DIMS = (2, 5, 10, 15, 20, 40, 50)


class ConfigError(ValueError):
    pass


# -- algorithms ---------------------------------------------------------------

def _run_reckless(problem, budget, seed, params, rng, variant):
    cfg = RecklessConfig(budget, variant=variant, seed=seed, **params)
    return run_reckless(problem, cfg, rng=rng).to_trace()


def _run_coev(runner):
    def run(problem, budget, seed, params, rng, _variant=None):
        return runner(problem, CoevConfig(budget, seed=seed, **params), rng=rng)
    return run


def _run_mmde(problem, budget, seed, params, rng, _variant=None):
    return run_mmde(problem, MmdeConfig(budget, seed=seed, **params), rng=rng)


ALGORITHMS: Dict[str, Callable] = {
    "reckless": _run_reckless,
    "coeva": _run_coev(run_coev_alternating),
    "coevp": _run_coev(run_coev_parallel),
    "mmde": _run_mmde,
}


def parse_algorithm(algo_id: str):
    """``"reckless:CR"`` -> ``("reckless", "CR")``; other ids carry no variant."""
    name, _, variant = algo_id.strip().partition(":")
    name = name.lower()
    if name not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algo_id!r}; known: {sorted(ALGORITHMS)}")
    if name == "reckless":
        variant = resolve_variant(variant or "CR").code
        return name, variant
    if variant:
        raise ConfigError(f"{name} takes no variant")
    return name, None


def canonical_algorithm(algo_id: str) -> str:
    name, variant = parse_algorithm(algo_id)
    return f"{name}:{variant}" if variant else name


@dataclass(frozen=True)
class AlgorithmSpec:
    id: str
    params: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, obj) -> "AlgorithmSpec":
        if isinstance(obj, str):
            return cls(canonical_algorithm(obj))
        if isinstance(obj, dict) and "id" in obj:
            return cls(canonical_algorithm(obj["id"]), dict(obj.get("params", {})))
        raise ConfigError(f"bad algorithm entry {obj!r}")

    @property
    def label(self) -> str:
        """Id plus sorted hyperparameters; distinguishes tuned copies of one algorithm."""
        if not self.params:
            return self.id
        return self.id + "[" + ",".join(f"{k}={self.params[k]}" for k in sorted(self.params)) + "]"


# -- seeding ------------------------------------------------------------------

def _crc(s: str) -> int:
    return zlib.crc32(s.encode())


def run_rng(problem_id: str, algorithm: str, budget: int, seed: int) -> np.random.Generator:
    """Independent stream per ``(problem, algorithm, budget, seed)``."""
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), int(budget), _crc(problem_id), _crc(algorithm)]))


def run_key(problem_id: str, label: str, budget: int, seed: int) -> str:
    return f"{problem_id}|{label}|{int(budget)}|{int(seed)}"


# -- single run ---------------------------------------------------------------

def solve(problem_id: str, spec: AlgorithmSpec, budget: int, seed: int) -> RunTrace:
    problem = get_problem(problem_id)
    name, variant = parse_algorithm(spec.id)
    rng = run_rng(problem.id, spec.label, budget, seed)
    return ALGORITHMS[name](problem, int(budget), int(seed), spec.params, rng, variant)


def assess(problem_id: str, trace: RunTrace, oracle: RegretOracle) -> dict:
    """Worst case and regret of the run's final x.

    The oracle value depends on x alone (and so is cacheable); the run's own
    worst y is evaluated on the side and the larger value kept.
    """
    problem = get_problem(problem_id)
    x = np.asarray(trace.best.x, dtype=float)
    found = oracle.inner_argmax(problem, x)
    own = float(problem(x, np.asarray(trace.best.y, dtype=float)))
    worst, y_worst = (own, trace.best.y) if own > found.value else (found.value, found.y)
    opt = problem.optimum.value if problem.optimum is not None else 0.0
    return {"worst_case": float(worst), "worst_y": np.asarray(y_worst, float).tolist(),
            "regret": float(worst - opt)}


def run_one(problem_id: str, spec: AlgorithmSpec, budget: int, seed: int,
            oracle: RegretOracle) -> dict:
    trace = solve(problem_id, spec, budget, seed)
    rec = {"key": run_key(problem_id, spec.label, budget, seed), "problem": problem_id,
           "algorithm": spec.label, "budget": int(budget), "seed": int(seed),
           "x": np.asarray(trace.best.x, float).tolist(),
           "y": np.asarray(trace.best.y, float).tolist(),
           "value": trace.best.to_dict()["value"], "evaluations": int(trace.evaluations)}
    rec.update(assess(problem_id, trace, oracle))
    return rec


# -- store --------------------------------------------------------------------

class ResultStore:
    """Append-only JSONL file, one record per run, keyed by ``record["key"]``."""

    def __init__(self, path):
        self.path = Path(path)

    def records(self) -> List[dict]:
        if not self.path.exists():
            return []
        out = []
        with self.path.open() as fh:
            for n, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    out.append(json.loads(line))
                except ValueError:
                    log.warning("skipping malformed line %d of %s", n, self.path)
        return out

    def keys(self) -> set:
        return {r["key"] for r in self.records() if "key" in r}

    def append(self, record: dict) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


# -- experiment ---------------------------------------------------------------

def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "minimax_results"))


@dataclass
class ExperimentConfig:
    problems: List[str] = field(default_factory=lambda: list(DEFAULT_PROBLEMS))
    algorithms: List[AlgorithmSpec] = field(
        default_factory=lambda: [AlgorithmSpec(a) for a in ("reckless:CR", "mmde", "coeva", "coevp")])
    budgets: List[int] = field(default_factory=lambda: list(DEFAULT_BUDGETS))
    runs: int = 60
    base_seed: int = 0
    output_dir: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        self.algorithms = [a if isinstance(a, AlgorithmSpec) else AlgorithmSpec.parse(a)
                           for a in self.algorithms]
        self.budgets = [int(b) for b in self.budgets]
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not self.problems or not self.algorithms or not self.budgets:
            raise ConfigError("problems, algorithms and budgets must be nonempty")
        if self.budgets != sorted(self.budgets):
            raise ConfigError("budgets must be sorted ascending")
        for pid in self.problems:
            try:
                get_problem(pid)
            except KeyError as exc:
                raise ConfigError(str(exc)) from None
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def out(self) -> Path:
        return Path(self.output_dir) if self.output_dir else default_output_dir()

    def seeds(self) -> range:
        return range(self.base_seed, self.base_seed + self.runs)

    def cells(self) -> Iterable[tuple]:
        for pid in self.problems:
            for spec in self.algorithms:
                for budget in self.budgets:
                    for seed in self.seeds():
                        yield pid, spec, budget, seed

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"problems", "algorithms", "budgets", "runs", "base_seed", "output_dir", "workers"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)


@dataclass
class SweepSummary:
    completed: int
    skipped: int
    failed: int


_worker_oracle: Optional[RegretOracle] = None


def _worker(cell):
    global _worker_oracle
    if _worker_oracle is None:
        _worker_oracle = RegretOracle()
    t0 = time.perf_counter()
    rec = run_one(*cell, _worker_oracle)
    return rec, time.perf_counter() - t0


def run_experiment(config: ExperimentConfig, oracle: Optional[RegretOracle] = None) -> SweepSummary:
    """Run every missing cell of the sweep; completed keys are skipped."""
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    store = ResultStore(out / RESULTS_FILE)
    timings = ResultStore(out / TIMINGS_FILE)
    done = store.keys()
    todo = [c for c in config.cells() if run_key(c[0], c[1].label, c[2], c[3]) not in done]
    skipped = sum(1 for _ in config.cells()) - len(todo)
    completed = failed = 0

    def keep(rec, seconds):
        store.append(rec)
        timings.append({"key": rec["key"], "seconds": round(seconds, 3)})

    if config.workers == 1:
        oracle = oracle or RegretOracle(OracleConfig(cache_path=str(out / ORACLE_CACHE_FILE)))
        for cell in todo:
            t0 = time.perf_counter()
            try:
                rec = run_one(*cell, oracle)
            except Exception:  # one bad run must not abort the sweep
                log.exception("run %s failed", run_key(cell[0], cell[1].label, cell[2], cell[3]))
                failed += 1
                continue
            keep(rec, time.perf_counter() - t0)
            completed += 1
    else:
        with ProcessPoolExecutor(config.workers) as pool:
            futures = [(cell, pool.submit(_worker, cell)) for cell in todo]
            for cell, fut in futures:
                try:
                    rec, seconds = fut.result()
                except Exception:
                    log.exception("run %s failed", run_key(cell[0], cell[1].label, cell[2], cell[3]))
                    failed += 1
                    continue
                keep(rec, seconds)
                completed += 1
    return SweepSummary(completed, skipped, failed)
