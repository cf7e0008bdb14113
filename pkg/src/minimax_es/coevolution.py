"""Competitive coevolution baselines: alternating (CoevA) and parallel (CoevP).

A minimiser population X and a maximiser population Y evolve by tournament
selection and Gaussian mutation.  Each generation the best mutated
challengers replace the worst incumbents only if they do better, so the
populations change by at most ``replaced_per_gen`` members per side.

Both algorithms keep the full interaction matrix ``M[i, j] = L(X[i], Y[j])``
for the current populations.  Minimisers are ranked by their worst case over
Y (``M.max(1)``, ascending) and maximisers by their best case over X
(``M.min(0)``, descending).  Runs stop when the next ``lam x lam`` scan no
longer fits the evaluation cap.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np

from .es_core import MAXIMIZE, MINIMIZE
from .problems import BudgetCounter, BudgetExhausted, MinimaxProblem, evaluate_batch
from .records import RunTrace, SolutionRecord


@dataclass
class CoevConfig:
    total_fes: int
    population_size: int = 10
    tournament_size: int = 2
    mutation_prob: float = 0.9
    replaced_per_gen: int = 2
    mutation_scale: float = 0.1  # std of a mutation, as a fraction of the domain width
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must lie in [1, population_size]")
        if not 1 <= self.replaced_per_gen <= self.population_size:
            raise ValueError("replaced_per_gen must lie in [1, population_size]")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must lie in [0, 1]")
        if self.total_fes < self.population_size ** 2:
            raise ValueError("total_fes must cover at least one population scan")

    def to_dict(self) -> dict:
        return asdict(self)


class PartialScan(BudgetExhausted):
    """The budget ran out during a pairwise scan; ``best`` covers the rows done."""

    def __init__(self, msg, best):
        super().__init__(msg)
        self.best = best


class ScanResult(NamedTuple):
    x: np.ndarray
    y: np.ndarray
    value: float
    matrix: np.ndarray


def tournament_select(pop, scores, tau: int, rng: np.random.Generator,
                      mode: str = MINIMIZE) -> np.ndarray:
    """``len(pop)`` winners of independent ``tau``-ary tournaments.

    Entrants are drawn with replacement; ties go to the lower index.
    """
    pop = np.asarray(pop)
    s = np.asarray(scores, dtype=float)
    if len(s) != len(pop):
        raise ValueError("one score per member required")
    if tau < 1:
        raise ValueError("tournament size must be >= 1")
    key = -s if mode == MAXIMIZE else s
    entrants = rng.integers(0, len(pop), size=(len(pop), tau))
    winners = [min(row, key=lambda i: (key[i], i)) for row in entrants]
    return pop[winners].copy()


def gaussian_mutate(pop, bounds, mu_prob: float, rng: np.random.Generator,
                    scale: float = 0.1) -> np.ndarray:
    """Perturb each coordinate with probability ``mu_prob`` by ``N(0, (scale*width)^2)``."""
    pop = np.asarray(pop, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    width = bounds[:, 1] - bounds[:, 0]
    mask = rng.random(pop.shape) < mu_prob
    noise = rng.standard_normal(pop.shape) * (scale * width)
    return np.clip(pop + mask * noise, bounds[:, 0], bounds[:, 1])


def _minimax_entry(M):
    """(row, col) of ``argmin_i argmax_j M[i, j]``, ties to the lowest index."""
    worst = M.max(axis=1)
    i = int(np.argmin(worst))
    return i, int(np.argmax(M[i]))


def pairwise_best(problem: MinimaxProblem, X, Y, budget: BudgetCounter) -> ScanResult:
    """Evaluate every pair and return the x with the smallest worst case over Y."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    nx, ny = len(X), len(Y)
    rows = nx if budget.remaining >= nx * ny else budget.remaining // ny
    M = np.empty((rows, ny))
    if rows:
        M[:] = evaluate_batch(problem, np.repeat(X[:rows], ny, axis=0),
                              np.tile(Y, (rows, 1)), budget).reshape(rows, ny)
    M = np.where(np.isnan(M), np.inf, M)
    best = None
    if rows:
        i, j = _minimax_entry(M)
        best = ScanResult(X[i].copy(), Y[j].copy(), float(M[i, j]), M)
    if rows < nx:
        raise PartialScan(f"budget allowed {rows} of {nx} rows", best)
    return best


def _initial(problem, cfg, rng, X0, Y0):
    lam = cfg.population_size
    X = problem.sample_x(rng, lam) if X0 is None else np.array(X0, dtype=float)
    Y = problem.sample_y(rng, lam) if Y0 is None else np.array(Y0, dtype=float)
    if len(X) != lam or len(Y) != lam:
        raise ValueError(f"initial populations must have {lam} members")
    return X, Y


def _sorted(X, Y, M):
    ix = np.argsort(M.max(axis=1), kind="stable")
    X, M = X[ix], M[ix]
    iy = np.argsort(-M.min(axis=0), kind="stable")
    return X, Y[iy], M[:, iy]


def _record(X, Y, M, used) -> SolutionRecord:
    i, j = _minimax_entry(M)
    return SolutionRecord(X[i].copy(), Y[j].copy(), float(M[i, j]), used)


def _scan(problem, X, Y, budget):
    return pairwise_best(problem, X, Y, budget).matrix


def _row(problem, x, Y, budget):
    v = evaluate_batch(problem, np.broadcast_to(x, (len(Y), problem.n_x)), Y, budget)
    return np.where(np.isnan(v), np.inf, v)


def _col(problem, X, y, budget):
    v = evaluate_batch(problem, X, np.broadcast_to(y, (len(X), problem.n_y)), budget)
    return np.where(np.isnan(v), np.inf, v)


def run_coev_alternating(problem: MinimaxProblem, config: CoevConfig, *, X0=None, Y0=None,
                         rng: Optional[np.random.Generator] = None) -> RunTrace:
    """CoevA: minimisers evolve against the current maximisers, then vice versa."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    budget = BudgetCounter(config.total_fes)
    lam, r, tau = config.population_size, config.replaced_per_gen, config.tournament_size
    X, Y = _initial(problem, config, rng, X0, Y0)
    M = _scan(problem, X, Y, budget)
    history = []
    while True:
        X, Y, M = _sorted(X, Y, M)
        history.append(_record(X, Y, M, budget.used))
        if budget.remaining < lam * lam:
            break
        # minimiser turn: challengers face the current maximisers
        Xc = gaussian_mutate(tournament_select(X, M.max(axis=1), tau, rng, MINIMIZE),
                             problem.x_bounds, config.mutation_prob, rng, config.mutation_scale)
        Mc = _scan(problem, Xc, Y, budget)
        order = np.argsort(Mc.max(axis=1), kind="stable")
        for i in range(r):
            ch, slot = order[i], lam - 1 - i
            if Mc[ch].max() < M[slot, slot]:
                X[slot], M[slot] = Xc[ch], Mc[ch]
        if budget.remaining < lam * lam:
            break
        # maximiser turn: challengers face the updated minimisers
        Yc = gaussian_mutate(tournament_select(Y, M.min(axis=0), tau, rng, MAXIMIZE),
                             problem.y_bounds, config.mutation_prob, rng, config.mutation_scale)
        Mm = _scan(problem, X, Yc, budget)
        xb, _ = _minimax_entry(Mm)
        order = np.argsort(-Mm[xb], kind="stable")
        for i in range(r):
            ch, slot = order[i], lam - 1 - i
            if Mm[xb, ch] > M[slot, slot]:
                Y[slot], M[:, slot] = Yc[ch], Mm[:, ch]
    return RunTrace("coeva", problem.id, config.seed, config.to_dict(), history[-1],
                    budget.used, history)


def run_coev_parallel(problem: MinimaxProblem, config: CoevConfig, *, X0=None, Y0=None,
                      rng: Optional[np.random.Generator] = None) -> RunTrace:
    """CoevP: both populations breed in the same generation and face each other's
    mutated offspring; replacements are then re-evaluated against the incumbents."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    budget = BudgetCounter(config.total_fes)
    lam, r, tau = config.population_size, config.replaced_per_gen, config.tournament_size
    X, Y = _initial(problem, config, rng, X0, Y0)
    M = _scan(problem, X, Y, budget)
    history = []
    while True:
        X, Y, M = _sorted(X, Y, M)
        history.append(_record(X, Y, M, budget.used))
        if budget.remaining < lam * lam:
            break
        Xc = gaussian_mutate(tournament_select(X, M.max(axis=1), tau, rng, MINIMIZE),
                             problem.x_bounds, config.mutation_prob, rng, config.mutation_scale)
        Yc = gaussian_mutate(tournament_select(Y, M.min(axis=0), tau, rng, MAXIMIZE),
                             problem.y_bounds, config.mutation_prob, rng, config.mutation_scale)
        Mc = _scan(problem, Xc, Yc, budget)
        x_order = np.argsort(Mc.max(axis=1), kind="stable")
        xb = x_order[0]
        y_order = np.argsort(-Mc[xb], kind="stable")
        incumbent = M.diagonal()[::-1].copy()  # L(x_slot, y_slot), worst slot first
        new_x, new_y = [], []
        for i in range(r):
            slot = lam - 1 - i
            if Mc[x_order[i]].max() < incumbent[i]:
                new_x.append((slot, Xc[x_order[i]]))
            if Mc[xb, y_order[i]] > incumbent[i]:
                new_y.append((slot, Yc[y_order[i]]))
        # keep M current; skip replacements the budget cannot re-evaluate
        for slot, x in new_x:
            if budget.remaining < lam:
                break
            X[slot] = x
            M[slot] = _row(problem, x, Y, budget)
        for slot, y in new_y:
            if budget.remaining < lam:
                break
            Y[slot] = y
            M[:, slot] = _col(problem, X, y, budget)
    return RunTrace("coevp", problem.id, config.seed, config.to_dict(), history[-1],
                    budget.used, history)
