"""RECKLESS: alternate an ES inner maximisation with an ES descent step on x.

Each of the ``T`` iterations spends ``(1 - s) v`` evaluations looking for a
worst case ``y_t`` of the current ``x_{t-1}`` (CMA-ES with restarts) and
``s v`` evaluations moving ``x`` along the ES-estimated descent direction of
``L(., y_t)`` (NES or CMA-ES).  The incumbent is the ``x_{t-1}`` with the
lowest ``L(x_{t-1}, y_t)``.  Optionally the outer search restarts from a
uniform pair whenever two successive displacements of ``x`` stop pointing the
same way.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np

from .es_core import RestartPolicy, cma_minimize, default_popsize, maximize_with_restarts, \
    nes_minimize
from .problems import BudgetCounter, BudgetExhausted, MinimaxProblem, evaluate_batch
from .records import RunTrace, SolutionRecord

N_STEP_FRACTIONS = 5  # |S|, the number of step fractions s considered


class ConfigError(ValueError):
    pass


class Schedule(NamedTuple):
    T: int
    v: int
    inner_fes: int
    outer_fes: int


def _exact(s) -> Fraction:
    return Fraction(s).limit_denominator(10 ** 9)


def budget_schedule(total_fes: int, s: float, n_x: int, n_y: int, *,
                    lam_inner: Optional[int] = None, lam_outer: Optional[int] = None,
                    n_fractions: int = N_STEP_FRACTIONS) -> Schedule:
    """Split ``total_fes`` into ``T`` iterations of ``(1 - s) v`` + ``s v`` evaluations.

    ``T = floor(sqrt(#FEs / ((|S| + 1)(lam_in + 2 s lam_out))))`` and the
    per-iteration budgets are ``floor((1 - s) #FEs / T)`` and
    ``floor(s #FEs / T)``.  Population sizes default to ``4 + floor(3 ln n)``.
    """
    if not 0 < s <= 0.5:
        raise ConfigError(f"s must lie in (0, 0.5], got {s}")
    lam1 = lam_inner or default_popsize(n_y)
    lam2 = lam_outer or default_popsize(n_x)
    s_ = _exact(s)
    rounds = Fraction(int(total_fes)) / ((n_fractions + 1) * (lam1 + 2 * s_ * lam2))
    T = math.isqrt(math.floor(rounds))
    if T < 1:
        raise ConfigError(
            f"{total_fes} evaluations are too few for one iteration "
            f"(need {math.ceil((n_fractions + 1) * (lam1 + 2 * s_ * lam2))})")
    per_iter = Fraction(int(total_fes), T)
    return Schedule(T, int(total_fes) // T, math.floor((1 - s_) * per_iter), math.floor(s_ * per_iter))


@dataclass(frozen=True)
class Variant:
    engine: str  # "NES" or "CMA"
    antithetic: bool = False
    powell_restart: bool = False

    @property
    def code(self) -> str:
        return ("A" if self.antithetic else "") + self.engine[0] + ("R" if self.powell_restart else "")


def resolve_variant(code: str) -> Variant:
    """Parse a variant code such as ``"CR"``, ``"ACR"`` or ``"N"``."""
    letters = code.strip().upper()
    if not letters or len(set(letters)) != len(letters) or set(letters) - set("ANCR"):
        raise ConfigError(f"bad variant code {code!r}")
    if ("N" in letters) == ("C" in letters):
        raise ConfigError(f"variant {code!r} must name exactly one of N (NES) or C (CMA-ES)")
    return Variant("NES" if "N" in letters else "CMA", "A" in letters, "R" in letters)


def powell_restart_check(x_t, x_prev, x_prev2) -> bool:
    """True when the latest displacement does not continue the previous one."""
    d_now = np.asarray(x_t, dtype=float) - np.asarray(x_prev, dtype=float)
    d_before = np.asarray(x_prev, dtype=float) - np.asarray(x_prev2, dtype=float)
    return float(d_now @ d_before) <= 0.0


@dataclass
class RecklessConfig:
    total_fes: int
    s: float = 0.5
    variant: str = "CR"
    seed: int = 0
    nes_sigma: float = 0.25
    nes_eta: float = 1e-4
    cma_sigma: float = 0.25
    inner_warm_start: bool = False  # start each inner search at y_{t-1} instead of a uniform y
    inner_policy: RestartPolicy = field(default_factory=RestartPolicy)

    def __post_init__(self):
        if self.total_fes < 1:
            raise ConfigError("total_fes must be positive")
        if not 0 < self.s <= 0.5:
            raise ConfigError(f"s must lie in (0, 0.5], got {self.s}")
        resolve_variant(self.variant)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["inner_policy"] = asdict(self.inner_policy)
        return d


class IterateRecord(NamedTuple):
    t: int
    x: np.ndarray
    y: np.ndarray
    value: float  # L(x_{t-1}, y_t)
    evaluations: int


@dataclass
class RecklessTrajectory:
    config: RecklessConfig
    problem_id: str
    schedule: Schedule
    best: SolutionRecord
    evaluations: int
    iterates: list = field(default_factory=list)
    restarts: list = field(default_factory=list)
    best_history: list = field(default_factory=list)

    def to_trace(self) -> RunTrace:
        return RunTrace(f"reckless:{self.config.variant}", self.problem_id, self.config.seed,
                        self.config.to_dict(), self.best, self.evaluations, list(self.best_history))


def run_reckless(problem: MinimaxProblem, config: RecklessConfig, *, x0=None, y0=None,
                 rng: Optional[np.random.Generator] = None,
                 budget: Optional[BudgetCounter] = None) -> RecklessTrajectory:
    variant = resolve_variant(config.variant)
    sched = budget_schedule(config.total_fes, config.s, problem.n_x, problem.n_y)
    rng = np.random.default_rng(config.seed) if rng is None else rng
    budget = BudgetCounter(config.total_fes) if budget is None else budget
    start_used = budget.used

    x_prev = problem.sample_x(rng) if x0 is None else np.asarray(x0, dtype=float)
    y_prev = problem.sample_y(rng) if y0 is None else np.asarray(y0, dtype=float)
    # the incumbent's value is unknown until its first worst-case search
    best = SolutionRecord(x_prev.copy(), y_prev.copy(), math.inf, 0)
    traj = RecklessTrajectory(config, problem.id, sched, best, 0)
    leftover = config.total_fes - sched.T * (sched.inner_fes + sched.outer_fes)
    path = [x_prev]  # x positions since the last restart

    def inner_fn(x):
        x_row = x.reshape(1, -1)
        return lambda Y: evaluate_batch(problem, np.broadcast_to(x_row, (len(Y), problem.n_x)),
                                        Y, budget)

    def outer_fn(y):
        y_row = y.reshape(1, -1)
        return lambda X: evaluate_batch(problem, X, np.broadcast_to(y_row, (len(X), problem.n_y)),
                                        budget)

    try:
        for t in range(1, sched.T + 1):
            units = sched.inner_fes + (leftover if t == sched.T else 0)
            found = maximize_with_restarts(inner_fn(x_prev), problem.y_bounds, units,
                                           config.inner_policy, rng,
                                           y0=y_prev if config.inner_warm_start else None,
                                           sigma=config.cma_sigma)
            y_t = found.y
            if found.value < traj.best.value:
                traj.best = SolutionRecord(x_prev.copy(), y_t.copy(), found.value, budget.used - start_used)
            traj.best_history.append(traj.best)

            x_t = _descend(problem, variant, config, outer_fn(y_t), x_prev, sched.outer_fes, rng)
            path.append(x_t)
            if variant.powell_restart and len(path) >= 3 and powell_restart_check(*path[-1:-4:-1]):
                x_t, y_t = problem.sample_x(rng), problem.sample_y(rng)
                path = [x_t]
                traj.restarts.append(t)
            traj.iterates.append(IterateRecord(t, x_t, y_t, found.value, budget.used - start_used))
            x_prev, y_prev = x_t, y_t
    except BudgetExhausted:
        pass
    traj.evaluations = budget.used - start_used
    return traj


def _descend(problem, variant, config, fn, x_start, units, rng):
    if units <= 0:
        return x_start
    if variant.engine == "NES":
        x = nes_minimize(fn, x_start, units, rng, scale=problem.x_width, bounds=problem.x_bounds,
                         sigma=config.nes_sigma, eta=config.nes_eta, antithetic=variant.antithetic)
    else:
        x, _, _ = cma_minimize(fn, x_start, units, rng, scale=problem.x_width,
                               bounds=problem.x_bounds, sigma=config.cma_sigma,
                               antithetic=variant.antithetic)
    return problem.clip_x(x)
