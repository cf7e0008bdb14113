"""Regret of a proposed minimiser.

``regret(x) = max_y L(x, y) - L*``.  The inner maximum is estimated by an
ensemble of black-box solvers (CMA-ES with restarts, SciPy's differential
evolution, multistart Nelder-Mead and, for ``n_y <= 2``, a dense grid) and
the largest value any of them finds is kept.  Oracle evaluations are never
charged to an algorithm's budget.  Results can be memoised in an append-only
line-delimited cache file.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import optimize

from .es_core import RestartPolicy, maximize_with_restarts
from .problems import MinimaxProblem

log = logging.getLogger(__name__)

ENSEMBLE = ("cma_restarts", "differential_evolution", "multistart_local", "dense_grid")
ORACLE_SLACK = 1e-6
QUANTUM = 1e-12


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    ensemble: tuple = ENSEMBLE
    cma_restarts: int = 5
    cma_evals_per_restart: int = 2000
    de_popsize: int = 20
    de_evals: int = 2000
    local_starts: int = 20
    grid_points_1d: int = 10 ** 6
    grid_points_2d: int = 4 * 10 ** 6
    seed: int = 0
    cache_path: Optional[str] = None

    def __post_init__(self):
        if not self.ensemble:
            raise ConfigError("the oracle ensemble must not be empty")
        unknown = set(self.ensemble) - set(ENSEMBLE)
        if unknown:
            raise ConfigError(f"unknown ensemble members {sorted(unknown)}")


class InnerMax(NamedTuple):
    y: np.ndarray
    value: float
    member: str


class Regret(NamedTuple):
    regret: float
    worst_case: float


# -- cache --------------------------------------------------------------------

def cache_key(problem_id: str, x) -> str:
    q = np.round(np.asarray(x, dtype=float).ravel() / QUANTUM).astype(np.int64)
    return problem_id + "|" + ",".join(str(int(v)) for v in q)


class OracleCache:
    """Exact-match memo of inner-maximum values, optionally backed by a file."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self._data: dict = {}
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self):
        try:
            with self.path.open() as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    rec = json.loads(line)
                    self._data[rec["key"]] = (np.array(rec["y"], dtype=float), float(rec["value"]))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            warnings.warn(f"ignoring unreadable oracle cache {self.path}: {exc}")
            self._data = {}

    def lookup(self, problem_id: str, x) -> Optional[InnerMax]:
        hit = self._data.get(cache_key(problem_id, x))
        return None if hit is None else InnerMax(hit[0], hit[1], "cache")

    def store(self, problem_id: str, x, y, value: float) -> None:
        key = cache_key(problem_id, x)
        if key in self._data:
            return
        self._data[key] = (np.asarray(y, dtype=float), float(value))
        if self.path is not None:
            rec = {"key": key, "problem": problem_id, "x": np.asarray(x, float).tolist(),
                   "y": np.asarray(y, float).tolist(), "value": float(value)}
            with self.path.open("a") as fh:
                fh.write(json.dumps(rec) + "\n")

    def __len__(self):
        return len(self._data)


# -- ensemble members ---------------------------------------------------------

def _as_max(values):
    v = np.asarray(values, dtype=float)
    return np.where(np.isnan(v), -np.inf, v)


def _grid_member(f, bounds, cfg):
    n = len(bounds)
    if n == 1:
        ys = np.linspace(bounds[0, 0], bounds[0, 1], cfg.grid_points_1d)[:, None]
        v = _as_max(f(ys))
        i = int(np.argmax(v))
        return ys[i], float(v[i])
    side = int(round(math.sqrt(cfg.grid_points_2d)))
    g0 = np.linspace(bounds[0, 0], bounds[0, 1], side)
    g1 = np.linspace(bounds[1, 0], bounds[1, 1], side)
    best_y, best_v = None, -np.inf
    rows = max(1, 250_000 // side)
    for start in range(0, side, rows):
        a, b = np.meshgrid(g0[start:start + rows], g1, indexing="ij")
        ys = np.column_stack([a.ravel(), b.ravel()])
        v = _as_max(f(ys))
        i = int(np.argmax(v))
        if v[i] > best_v:
            best_y, best_v = ys[i].copy(), float(v[i])
    return best_y, best_v


def _cma_member(f, bounds, cfg, rng):
    best_y, best_v = None, -np.inf
    for _ in range(cfg.cma_restarts):
        res = maximize_with_restarts(f, bounds, cfg.cma_evals_per_restart, RestartPolicy(), rng)
        if res.value > best_v:
            best_y, best_v = res.y, res.value
    return best_y, best_v


def _de_member(f, bounds, cfg, rng):
    n = len(bounds)
    mult = max(1, math.ceil(cfg.de_popsize / n))
    pop = mult * n
    maxiter = max(1, cfg.de_evals // pop - 1)

    def neg(Y):  # scipy passes (n, S)
        return -_as_max(f(np.atleast_2d(Y.T)))

    res = optimize.differential_evolution(
        neg, bounds, popsize=mult, maxiter=maxiter, tol=0, polish=False,
        seed=rng, vectorized=True, updating="deferred")
    return np.asarray(res.x), -float(res.fun)


def _local_member(f, bounds, starts):
    """Bounded quasi-Newton ascent from every start, then a Nelder-Mead polish
    of the best point for low dimensions (kinks defeat finite differences)."""
    lo, hi = bounds[:, 0], bounds[:, 1]

    def neg(y):
        v = _as_max(f(np.clip(y, lo, hi)[None, :]))[0]
        return -v if np.isfinite(v) else 1e300

    box = list(map(tuple, bounds))
    best_y, best_v = None, -np.inf
    for y0 in starts:
        res = optimize.minimize(neg, np.clip(y0, lo, hi), method="L-BFGS-B", bounds=box,
                                options={"maxfun": 2000, "ftol": 1e-15, "gtol": 1e-12})
        y = np.clip(res.x, lo, hi)
        v = float(_as_max(f(y[None, :]))[0])
        if v > best_v:
            best_y, best_v = y, v
    if best_y is not None and len(bounds) <= 10:
        res = optimize.minimize(neg, best_y, method="Nelder-Mead", bounds=box,
                                options={"xatol": 1e-11, "fatol": 1e-15,
                                         "maxfev": 400 * len(bounds)})
        y = np.clip(res.x, lo, hi)
        v = float(_as_max(f(y[None, :]))[0])
        if v > best_v:
            best_y, best_v = y, v
    return best_y, best_v


class RegretOracle:
    """Ensemble inner maximiser with a persistent memo."""

    def __init__(self, config: OracleConfig = OracleConfig()):
        self.config = config
        self.cache = OracleCache(config.cache_path)
        self.evaluations = 0

    def _metered_slice(self, problem, x):
        inner = problem.slice_y(x)

        def f(Y):
            Y = np.atleast_2d(Y)
            self.evaluations += len(Y)
            return inner(Y)
        return f

    def inner_argmax(self, problem: MinimaxProblem, x, seeds: Sequence = ()) -> InnerMax:
        """Best ``(y, L(x, y))`` found by the ensemble.

        ``seeds`` are candidate worst cases (e.g. an algorithm's own ``y``);
        they are evaluated directly and used as local-search starts, so the
        oracle never reports less than an algorithm already found.
        """
        x = np.asarray(x, dtype=float).ravel()
        if not problem.in_x(x[None, :])[0]:
            raise ValueError(f"x outside the domain of {problem.id}")
        cached = self.cache.lookup(problem.id, x)
        seeds = [np.asarray(s, dtype=float).ravel() for s in seeds]
        if cached is not None and not seeds:
            return cached
        cfg = self.config
        f = self._metered_slice(problem, x)
        bounds = np.asarray(problem.y_bounds)
        rng = np.random.default_rng([cfg.seed, problem.n_x, problem.n_y])
        found = [] if cached is None else [cached]
        for y in seeds:
            y = problem.clip_y(y)
            found.append(InnerMax(y, float(_as_max(f(y[None, :]))[0]), "seed"))
        if cached is None:
            if "dense_grid" in cfg.ensemble and problem.n_y <= 2:
                found.append(InnerMax(*_grid_member(f, bounds, cfg), "dense_grid"))
            if "cma_restarts" in cfg.ensemble:
                found.append(InnerMax(*_cma_member(f, bounds, cfg, rng), "cma_restarts"))
            if "differential_evolution" in cfg.ensemble:
                found.append(InnerMax(*_de_member(f, bounds, cfg, rng), "differential_evolution"))
        if "multistart_local" in cfg.ensemble:
            starts = [r.y for r in sorted(found, key=lambda r: -r.value) if r.y is not None]
            n_random = max(0, cfg.local_starts - len(starts))
            if n_random:
                starts += list(problem.sample_y(rng, n_random))
            found.append(InnerMax(*_local_member(f, bounds, starts), "multistart_local"))
        best = max((r for r in found if r.y is not None), key=lambda r: r.value)
        if cached is None or best.value > cached.value:
            self.cache.store(problem.id, x, best.y, best.value)
        return best

    def inner_max(self, problem: MinimaxProblem, x, seeds: Sequence = ()) -> float:
        return self.inner_argmax(problem, x, seeds).value

    def regret(self, problem: MinimaxProblem, x, seeds: Sequence = (),
               comparison_mode: bool = False) -> Regret:
        """``Regret(regret, worst_case)``; without a known optimum only ``comparison_mode``
        is allowed, in which case the regret is the worst case itself."""
        worst = self.inner_max(problem, x, seeds)
        if problem.optimum is None:
            if not comparison_mode:
                raise ConfigError(f"{problem.id} has no known optimum; use comparison_mode")
            return Regret(worst, worst)
        return Regret(worst - problem.optimum.value, worst)


def inner_max_oracle(problem: MinimaxProblem, x, config: OracleConfig = OracleConfig()) -> float:
    return RegretOracle(config).inner_max(problem, x)


def regret(problem: MinimaxProblem, x, config: OracleConfig = OracleConfig()) -> float:
    return RegretOracle(config).regret(problem, x).regret


@dataclass
class RegretReport:
    problem_id: str
    algorithm: str
    budget: int
    regrets: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.regrets))

    @property
    def median(self) -> float:
        return float(np.median(self.regrets))

    @property
    def std(self) -> float:
        return float(np.std(self.regrets))

    @property
    def oracle_beaten(self) -> bool:
        """Some regret is below ``-ORACLE_SLACK``: the oracle missed a worse y."""
        return any(r < -ORACLE_SLACK for r in self.regrets)

    def summary(self) -> dict:
        return {"problem": self.problem_id, "algorithm": self.algorithm, "budget": self.budget,
                "runs": len(self.regrets), "mean": self.mean, "median": self.median,
                "std": self.std, "oracle_beaten": self.oracle_beaten}
