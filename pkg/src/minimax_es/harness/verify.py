"""Self-checks run by ``minimax-es verify``.

* The RECKLESS schedule against the published (T, (1-s)v, sv) cells.
* Agreement of the ES descent estimate at an inner maximiser with central
  finite differences of ``-grad_x L(x, y*)`` (Danskin).
"""
from __future__ import annotations

from typing import List, NamedTuple

import numpy as np

from ..es_core import descent_direction
from ..oracle import OracleConfig, RegretOracle
from ..problems import get_problem
from ..reckless import budget_schedule

# (#FEs, s) -> (T, (1-s)v, sv) with lambda_1 = lambda_2 = 8
SCHEDULE_CELLS = {
    (100, 0.1): (1, 90, 10), (100, 0.2): (1, 80, 20), (100, 0.3): (1, 70, 30),
    (100, 0.4): (1, 60, 40), (100, 0.5): (1, 50, 50),
    (100_000, 0.1): (41, 2195, 243), (100_000, 0.2): (38, 2105, 526),
    (100_000, 0.3): (36, 1944, 833), (100_000, 0.4): (34, 1764, 1176),
    (100_000, 0.5): (32, 1562, 1562),
}


class CellCheck(NamedTuple):
    fes: int
    s: float
    expected: tuple
    got: tuple

    @property
    def ok(self) -> bool:
        return self.expected == self.got


def check_schedule() -> List[CellCheck]:
    out = []
    for (fes, s), expected in SCHEDULE_CELLS.items():
        sch = budget_schedule(fes, s, 1, 1, lam_inner=8, lam_outer=8)
        out.append(CellCheck(fes, s, expected, (sch.T, sch.inner_fes, sch.outer_fes)))
    return out


def central_gradient(f, x, h: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


class GradientCheck(NamedTuple):
    problem: str
    x: np.ndarray
    cosine: float


def check_descent(problem_ids=("L1", "L5", "L6"), points: int = 20, sigma: float = 1e-3,
                  lam: int = 100_000, seed: int = 0, oracle: RegretOracle = None) -> List[GradientCheck]:
    """Cosine between the ES descent estimate and ``-grad_x L(x, y*)`` at random x."""
    oracle = oracle or RegretOracle(OracleConfig(cma_restarts=2, de_evals=1000, local_starts=8))
    rng = np.random.default_rng(seed)
    out = []
    for pid in problem_ids:
        p = get_problem(pid)
        for _ in range(points):
            x = p.sample_x(rng)
            y_star = oracle.inner_argmax(p, x).y[None, :]

            def L_at(X, y_star=y_star):
                return p.batch(X, np.broadcast_to(y_star, (len(X), p.n_y)))

            est = descent_direction(L_at, x, sigma, lam, rng)
            fd = -central_gradient(lambda z: float(L_at(z[None, :])[0]), x)
            denom = np.linalg.norm(est) * np.linalg.norm(fd)
            cos = float(est @ fd / denom) if denom > 0 else 1.0
            out.append(GradientCheck(pid, x, cos))
    return out
