"""Differential-evolution minimax baseline with bottom-boosting.

This is a reconstruction from a short prose description, not a port of the
original MMDE reference implementation.  Where that description is silent the
choices below are ours:

* variation is DE/rand/1/bin;
* every candidate x carries a worst-case estimate, the largest ``L(x, y)``
  seen so far, and the population is kept as a min-heap on that estimate;
* a trial is screened with one evaluation against its target's worst y and
  replaces the target only if that value is below the target's estimate;
* only the heap bottom (the most promising candidate) has its estimate
  refined, by short CMA-ES bursts over y, until it has received ``Ks``
  refinement evaluations, alternating bursts started at the current worst y
  with bursts started at a uniform y.  A bottom entry that reaches ``Ks``
  is trusted and becomes the incumbent.

Estimates never decrease, so refinement only pushes an over-optimistic
candidate up the heap.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .es_core import RestartPolicy, maximize_with_restarts
from .problems import BudgetCounter, BudgetExhausted, MinimaxProblem, evaluate_batch
from .records import RunTrace, SolutionRecord


class ConfigError(ValueError):
    pass


@dataclass
class MmdeConfig:
    total_fes: int
    population_size: int = 100
    F: float = 0.7
    CR: float = 0.5
    Ks: int = 190
    burst_evals: int = 38  # evaluations per refinement burst; Ks / 5
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 4:
            raise ConfigError("DE/rand/1 needs a population of at least 4")
        if not (0.0 <= self.F <= 1.0 and 0.0 <= self.CR <= 1.0):
            raise ConfigError("F and CR must lie in [0, 1]")
        if self.Ks < 1 or self.burst_evals < 1:
            raise ConfigError("Ks and burst_evals must be positive")
        if self.total_fes < self.population_size:
            raise ConfigError("total_fes must cover one evaluation per initial candidate")

    def to_dict(self) -> dict:
        return asdict(self)


_uid = itertools.count()


@dataclass(eq=False)
class HeapEntry:
    x: np.ndarray
    worst_case_estimate: float
    y_worst: np.ndarray
    refinement_evals: int = 0
    uid: int = field(default_factory=lambda: next(_uid))

    def __lt__(self, other: "HeapEntry") -> bool:
        return (self.worst_case_estimate, self.uid) < (other.worst_case_estimate, other.uid)


def is_heap(heap) -> bool:
    """O(n) check of the min-heap property."""
    return all(not heap[i] < heap[(i - 1) // 2] for i in range(1, len(heap)))


def de_variation(pop, F: float, CR: float, rng: np.random.Generator, bounds=None) -> np.ndarray:
    """DE/rand/1/bin trial vectors, one per member.

    For target ``i`` the base ``a`` and difference pair ``b, c`` are distinct
    members other than ``i``; coordinates come from ``a + F (b - c)`` with
    probability ``CR`` and always at one random index.
    """
    P = np.asarray(pop, dtype=float)
    n_pop, n = P.shape
    if n_pop < 4:
        raise ConfigError("DE/rand/1 needs a population of at least 4")
    trials = np.empty_like(P)
    for i in range(n_pop):
        others = rng.choice(n_pop - 1, size=3, replace=False)
        a, b, c = (others + (others >= i))  # skip index i
        mutant = P[a] + F * (P[b] - P[c])
        take = rng.random(n) < CR
        take[rng.integers(n)] = True
        trials[i] = np.where(take, mutant, P[i])
    if bounds is not None:
        bounds = np.asarray(bounds, dtype=float)
        trials = np.clip(trials, bounds[:, 0], bounds[:, 1])
    return trials


def _refine(entry: HeapEntry, problem, budget, units, rng) -> None:
    x_row = entry.x.reshape(1, -1)

    def slice_fn(Y):
        return evaluate_batch(problem, np.broadcast_to(x_row, (len(Y), problem.n_x)), Y, budget)

    # alternate local bursts from the current worst y with global ones from a uniform y
    local = (entry.refinement_evals // max(units, 1)) % 2 == 0
    res = maximize_with_restarts(slice_fn, problem.y_bounds, units, RestartPolicy(), rng,
                                 y0=entry.y_worst if local else None)
    entry.refinement_evals += units
    if res.value > entry.worst_case_estimate:
        entry.worst_case_estimate, entry.y_worst = res.value, res.y


def bottom_boost_refine(heap: list, problem: MinimaxProblem, budget: BudgetCounter,
                        per_candidate_evals: int, rng: np.random.Generator,
                        Ks: int = 190) -> list:
    """Refine the heap bottom until it has received ``Ks`` refinement evaluations.

    On return ``heap[0]`` is trusted unless the budget ran out first.
    """
    if not heap:
        raise ValueError("empty heap")
    while heap[0].refinement_evals < Ks:
        units = min(per_candidate_evals, Ks - heap[0].refinement_evals, budget.remaining)
        if units <= 0:
            break
        entry = heapq.heappop(heap)
        try:
            _refine(entry, problem, budget, units, rng)
        finally:
            heapq.heappush(heap, entry)
    return heap


def _record(entry: HeapEntry, used: int) -> SolutionRecord:
    return SolutionRecord(entry.x.copy(), entry.y_worst.copy(), entry.worst_case_estimate, used)


def run_mmde(problem: MinimaxProblem, config: MmdeConfig, *,
             rng: Optional[np.random.Generator] = None) -> RunTrace:
    rng = np.random.default_rng(config.seed) if rng is None else rng
    budget = BudgetCounter(config.total_fes)
    N = config.population_size

    X = problem.sample_x(rng, N)
    Y = problem.sample_y(rng, N)
    vals = evaluate_batch(problem, X, Y, budget)
    entries = [HeapEntry(X[i], _num(vals[i]), Y[i]) for i in range(N)]
    heap = list(entries)
    heapq.heapify(heap)
    history = []
    incumbent = None
    try:
        while True:
            bottom_boost_refine(heap, problem, budget, config.burst_evals, rng, config.Ks)
            if heap[0].refinement_evals >= config.Ks:
                incumbent = heap[0]
                history.append(_record(incumbent, budget.used))
            if budget.remaining == 0:
                break
            # one generation: screen every trial against its target's worst y
            P = np.array([e.x for e in entries])
            trials = de_variation(P, config.F, config.CR, rng, problem.x_bounds)
            m = min(N, budget.remaining)
            Yw = np.array([e.y_worst for e in entries[:m]])
            screen = evaluate_batch(problem, trials[:m], Yw, budget)
            for i in range(m):
                v = _num(screen[i])
                if v < entries[i].worst_case_estimate:
                    entries[i] = HeapEntry(trials[i], v, entries[i].y_worst.copy())
            heap = list(entries)
            heapq.heapify(heap)
    except BudgetExhausted:
        pass
    if incumbent is None:
        incumbent = heap[0]
        history.append(_record(incumbent, budget.used))
    return RunTrace("mmde", problem.id, config.seed, config.to_dict(),
                    _record(incumbent, budget.used), budget.used, history)


def _num(v) -> float:
    v = float(v)
    return math.inf if math.isnan(v) else v
