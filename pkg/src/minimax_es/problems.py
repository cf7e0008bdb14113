"""Black-box minimax problems: the benchmark suite, the digital filter problem,
evaluation metering and the MSE metric.

Every problem is a stateless, vectorised evaluator ``L(X, Y)`` taking arrays of
shape ``(m, n_x)`` and ``(m, n_y)`` and returning ``m`` values.  Metering is
done from the outside with a :class:`BudgetCounter` so the same problem object
can be shared between an algorithm run and the regret oracle.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "BudgetExhausted",
    "DomainError",
    "FilterDomainError",
    "BudgetCounter",
    "Optimum",
    "MinimaxProblem",
    "FilterParams",
    "evaluate",
    "evaluate_batch",
    "saddle_value",
    "mse",
    "filter_amplitude",
    "filter_error",
    "get_problem",
    "problem_ids",
    "manifest",
    "write_manifest",
    "SCALABLE_DIMS",
]

# lower bound used in place of the open end of (0, 10]
OPEN_LOWER = 1e-9
SCALABLE_DIMS = (2, 5, 10, 15, 20, 40, 50)


class BudgetExhausted(RuntimeError):
    """Raised when a metered evaluation would exceed the evaluation cap."""


class DomainError(ValueError):
    """Raised when a point lies outside the problem's box domain."""


class FilterDomainError(ArithmeticError):
    """A factor under the square root of the filter amplitude is not positive."""


@dataclass
class BudgetCounter:
    """Monotone count of objective evaluations against a hard cap."""

    cap: int
    used: int = 0

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError(f"cap must be positive, got {self.cap}")
        if not 0 <= self.used <= self.cap:
            raise ValueError("used must lie in [0, cap]")

    @property
    def remaining(self) -> int:
        return self.cap - self.used

    def charge(self, n: int = 1) -> None:
        if n < 0:
            raise ValueError("cannot charge a negative number of evaluations")
        if self.used + n > self.cap:
            raise BudgetExhausted(
                f"{n} evaluation(s) requested with {self.remaining} of {self.cap} left")
        self.used += n


@dataclass(frozen=True)
class Optimum:
    """Known minimax solution.

    ``y is None`` means every y in the domain is optimal; ``x is None`` means
    only the optimal value is known.
    """

    x: Optional[tuple]
    y: Optional[tuple]
    value: float


@dataclass(frozen=True, eq=False)
class MinimaxProblem:
    id: str
    n_x: int
    n_y: int
    x_bounds: np.ndarray
    y_bounds: np.ndarray
    func: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    optimum: Optional[Optimum] = None
    description: str = ""

    def __post_init__(self):
        for name, b, n in (("x_bounds", self.x_bounds, self.n_x),
                           ("y_bounds", self.y_bounds, self.n_y)):
            b = np.array(b, dtype=float)
            if b.shape != (n, 2):
                raise ValueError(f"{name} must have shape ({n}, 2), got {b.shape}")
            if not np.all(b[:, 0] < b[:, 1]):
                raise ValueError(f"{name}: every interval needs lower < upper")
            b.setflags(write=False)
            object.__setattr__(self, name, b)

    # -- unmetered evaluation -------------------------------------------------
    def batch(self, X, Y) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if len(X) != len(Y):
            X, Y = _broadcast_rows(X, Y)
        return np.asarray(self.func(X, Y), dtype=float)

    def __call__(self, x, y) -> float:
        return float(self.batch(np.reshape(x, (1, -1)), np.reshape(y, (1, -1)))[0])

    # -- domain helpers -------------------------------------------------------
    @property
    def x_width(self) -> np.ndarray:
        return self.x_bounds[:, 1] - self.x_bounds[:, 0]

    @property
    def y_width(self) -> np.ndarray:
        return self.y_bounds[:, 1] - self.y_bounds[:, 0]

    def in_x(self, X) -> np.ndarray:
        return _inside(X, self.x_bounds)

    def in_y(self, Y) -> np.ndarray:
        return _inside(Y, self.y_bounds)

    def clip_x(self, X) -> np.ndarray:
        return np.clip(X, self.x_bounds[:, 0], self.x_bounds[:, 1])

    def clip_y(self, Y) -> np.ndarray:
        return np.clip(Y, self.y_bounds[:, 0], self.y_bounds[:, 1])

    def sample_x(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        return _uniform(rng, self.x_bounds, size)

    def sample_y(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        return _uniform(rng, self.y_bounds, size)

    def slice_y(self, x) -> Callable[[np.ndarray], np.ndarray]:
        """Unmetered ``Y -> L(x, Y)`` for a fixed x."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return lambda Y: self.batch(np.broadcast_to(x, (len(Y), self.n_x)), Y)

    def to_record(self) -> dict:
        opt = None
        if self.optimum is not None:
            opt = {"x": None if self.optimum.x is None else list(self.optimum.x),
                   "y": "any" if self.optimum.y is None else list(self.optimum.y),
                   "value": self.optimum.value}
        return {"id": self.id, "n_x": self.n_x, "n_y": self.n_y,
                "x_bounds": self.x_bounds.tolist(), "y_bounds": self.y_bounds.tolist(),
                "known_optimum": opt, "description": self.description}


def _broadcast_rows(X, Y):
    m = max(len(X), len(Y))
    if len(X) not in (1, m) or len(Y) not in (1, m):
        raise ValueError(f"cannot pair {len(X)} x-rows with {len(Y)} y-rows")
    return (np.broadcast_to(X, (m, X.shape[1])), np.broadcast_to(Y, (m, Y.shape[1])))


def _inside(P, bounds) -> np.ndarray:
    P = np.atleast_2d(P)
    return np.all((P >= bounds[:, 0]) & (P <= bounds[:, 1]), axis=1)


def _uniform(rng, bounds, size):
    shape = (len(bounds),) if size is None else (size, len(bounds))
    return bounds[:, 0] + rng.random(shape) * (bounds[:, 1] - bounds[:, 0])


# -- metered evaluation -------------------------------------------------------

def evaluate_batch(problem: MinimaxProblem, X, Y, budget: BudgetCounter) -> np.ndarray:
    """Evaluate ``L`` row-wise, charging one unit per row.

    The whole batch is rejected (nothing charged) if it does not fit the
    remaining budget or if any row lies outside the domain.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != problem.n_x or Y.shape[1] != problem.n_y:
        raise DomainError(f"{problem.id}: expected dims ({problem.n_x}, {problem.n_y}), "
                          f"got ({X.shape[1]}, {Y.shape[1]})")
    m = max(len(X), len(Y))
    xb, yb = problem.x_bounds, problem.y_bounds
    if not ((X >= xb[:, 0]).all() and (X <= xb[:, 1]).all()
            and (Y >= yb[:, 0]).all() and (Y <= yb[:, 1]).all()):
        raise DomainError(f"{problem.id}: point outside the box domain")
    budget.charge(m)
    return problem.batch(X, Y)


def evaluate(problem: MinimaxProblem, x, y, budget: BudgetCounter) -> float:
    return float(evaluate_batch(problem, np.reshape(x, (1, -1)), np.reshape(y, (1, -1)), budget)[0])


def saddle_value(problem: MinimaxProblem) -> Optional[float]:
    return None if problem.optimum is None else problem.optimum.value


def mse(x, x_star) -> float:
    """Mean squared Euclidean error ``||x - x*||^2 / n``."""
    x = np.asarray(x, dtype=float).ravel()
    x_star = np.asarray(x_star, dtype=float).ravel()
    if x.shape != x_star.shape or x.size == 0:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x_star.shape}")
    return float(np.sum((x - x_star) ** 2) / x.size)


# -- benchmark functions ------------------------------------------------------

def _l1(X, Y):
    return np.sum((X - 5.0) ** 2 - (Y - 5.0) ** 2, axis=1)


def _l2(X, Y):
    return np.sum(np.minimum(3.0 - 0.2 * X + 0.3 * Y, 3.0 + 0.2 * X - 0.1 * Y), axis=1)


def _l3(X, Y):
    x, y = X[:, 0], Y[:, 0]
    return np.sin(x - y) / np.sqrt(x * x + y * y)


def _l4(X, Y):
    r = np.sqrt(X[:, 0] ** 2 + Y[:, 0] ** 2)
    return np.cos(r) / (r + 10.0)


def _l5(X, Y):
    x1, x2 = X[:, 0], X[:, 1]
    y1, y2 = Y[:, 0], Y[:, 1]
    return (100.0 * (x2 - x1 ** 2) ** 2 + (1.0 - x1) ** 2
            - y1 * (x1 + x2 ** 2) - y2 * (x1 ** 2 + x2))


def _l6(X, Y):
    x1, x2 = X[:, 0], X[:, 1]
    y1, y2 = Y[:, 0], Y[:, 1]
    return (x1 - 2.0) ** 2 + (x2 - 1.0) ** 2 + y1 * (x1 ** 2 - x2) + y2 * (x1 + x2 - 2.0)


def _box(lo, hi, n):
    return np.tile([lo, hi], (n, 1)).astype(float)


def make_l1(n: int = 3) -> MinimaxProblem:
    return MinimaxProblem(
        "L1" if n == 3 else f"L1-n{n}", n, n, _box(0, 10, n), _box(0, 10, n), _l1,
        Optimum((5.0,) * n, (5.0,) * n, 0.0),
        "sum (x_i - 5)^2 - (y_i - 5)^2")


def make_l2(n: int = 3) -> MinimaxProblem:
    return MinimaxProblem(
        "L2" if n == 3 else f"L2-n{n}", n, n, _box(0, 10, n), _box(0, 10, n), _l2,
        Optimum((0.0,) * n, (0.0,) * n, 3.0 * n),
        "sum min(3 - 0.2 x_i + 0.3 y_i, 3 + 0.2 x_i - 0.1 y_i)")


def make_l3() -> MinimaxProblem:
    x_star, y_star = (10.0,), (2.125683,)
    value = float(_l3(np.array([x_star]), np.array([y_star]))[0])
    return MinimaxProblem("L3", 1, 1, _box(OPEN_LOWER, 10, 1), _box(OPEN_LOWER, 10, 1), _l3,
                          Optimum(x_star, y_star, value), "sin(x - y) / sqrt(x^2 + y^2)")


def make_l4() -> MinimaxProblem:
    # y* = 0 and y* = 10 are both listed; 0 is the (marginally) larger one
    x_star, y_star = (7.044146,), (0.0,)
    value = float(_l4(np.array([x_star]), np.array([y_star]))[0])
    return MinimaxProblem("L4", 1, 1, _box(0, 10, 1), _box(0, 10, 1), _l4,
                          Optimum(x_star, y_star, value),
                          "cos(sqrt(x^2 + y^2)) / (sqrt(x^2 + y^2) + 10)")


def make_l5() -> MinimaxProblem:
    return MinimaxProblem(
        "L5", 2, 2, np.array([[-0.5, 0.5], [0.0, 1.0]]), _box(0, 10, 2), _l5,
        Optimum((0.5, 0.25), (0.0, 0.0), 0.25),
        "100 (x2 - x1^2)^2 + (1 - x1)^2 - y1 (x1 + x2^2) - y2 (x1^2 + x2)")


def make_l6() -> MinimaxProblem:
    return MinimaxProblem(
        "L6", 2, 2, _box(-1, 3, 2), _box(0, 10, 2), _l6,
        Optimum((1.0, 1.0), None, 1.0),
        "(x1 - 2)^2 + (x2 - 1)^2 + y1 (x1^2 - x2) + y2 (x1 + x2 - 2)")


# -- digital filter design ----------------------------------------------------

FILTER_K = 2


@dataclass(frozen=True)
class FilterParams:
    """Gain ``A`` and the K second-order section coefficients."""

    A: float
    a: tuple
    b: tuple
    c: tuple
    d: tuple

    def __post_init__(self):
        for name in "abcd":
            if len(getattr(self, name)) != FILTER_K:
                raise ValueError(f"{name} must have {FILTER_K} entries")

    @classmethod
    def from_vector(cls, x: Sequence[float]) -> "FilterParams":
        x = [float(v) for v in x]
        if len(x) != 1 + 4 * FILTER_K:
            raise ValueError(f"expected {1 + 4 * FILTER_K} parameters, got {len(x)}")
        k = FILTER_K
        return cls(x[0], tuple(x[1:1 + k]), tuple(x[1 + k:1 + 2 * k]),
                   tuple(x[1 + 2 * k:1 + 3 * k]), tuple(x[1 + 3 * k:]))

    def to_vector(self) -> np.ndarray:
        return np.array([self.A, *self.a, *self.b, *self.c, *self.d])

    @classmethod
    def identity(cls) -> "FilterParams":
        z = (0.0,) * FILTER_K
        return cls(1.0, z, z, z, z)


def _section_terms(p, q, cos_t):
    # 1 + p^2 + q^2 + 2q(2cos^2 t - 1) + 2p(1 + q)cos t
    return 1.0 + p * p + q * q + 2.0 * q * (2.0 * cos_t * cos_t - 1.0) + 2.0 * p * (1.0 + q) * cos_t


def _amplitude_batch(X: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Vectorised amplitude; NaN where a factor under the root is not positive."""
    k = FILTER_K
    A = X[:, 0]
    a, b = X[:, 1:1 + k], X[:, 1 + k:1 + 2 * k]
    c, d = X[:, 1 + 2 * k:1 + 3 * k], X[:, 1 + 3 * k:1 + 4 * k]
    cos_t = np.cos(theta)[:, None]
    num = _section_terms(a, b, cos_t)
    den = _section_terms(c, d, cos_t)
    bad = np.any((den <= 0.0) | (num < 0.0), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = A * np.prod(np.sqrt(num / den), axis=1)
    out[bad] = np.nan
    return out


def psi_to_theta(psi):
    return np.pi * np.asarray(psi, dtype=float)


def filter_amplitude(p: FilterParams, theta: float) -> float:
    val = _amplitude_batch(p.to_vector()[None, :], np.array([float(theta)]))[0]
    if np.isnan(val):
        raise FilterDomainError(f"non-positive factor under the square root at theta={theta}")
    return float(val)


def filter_error(p: FilterParams, psi: float) -> float:
    """Signed approximation error ``|H(theta(psi))| - |1 - 2 psi|``."""
    if not 0.0 <= psi <= 1.0:
        raise DomainError(f"psi must lie in [0, 1], got {psi}")
    return filter_amplitude(p, float(psi_to_theta(psi))) - abs(1.0 - 2.0 * psi)


def _filter_objective(X, Y):
    psi = Y[:, 0]
    return np.abs(_amplitude_batch(X, psi_to_theta(psi)) - np.abs(1.0 - 2.0 * psi))


def make_filter() -> MinimaxProblem:
    n = 1 + 4 * FILTER_K
    # perfect approximation is the infimum target
    return MinimaxProblem("filter", n, 1, _box(-1, 1, n), _box(0, 1, 1), _filter_objective,
                          Optimum(None, None, 0.0),
                          "| |H(x, pi psi)| - |1 - 2 psi| |, K = 2 sections")


# -- registry -----------------------------------------------------------------

_FIXED = {"L1": make_l1, "L2": make_l2, "L3": make_l3, "L4": make_l4,
          "L5": make_l5, "L6": make_l6, "filter": make_filter}
_SCALED = re.compile(r"^(L[12])-n(\d+)$")
_cache: dict = {}


def problem_ids(include_scaled: bool = False) -> list:
    ids = list(_FIXED)
    if include_scaled:
        ids += [f"{base}-n{n}" for base in ("L1", "L2") for n in SCALABLE_DIMS]
    return ids


def get_problem(problem_id: str) -> MinimaxProblem:
    """Look up a problem by id: ``L1``..``L6``, ``filter`` or ``L1-n20``-style."""
    if problem_id in _cache:
        return _cache[problem_id]
    if problem_id in _FIXED:
        prob = _FIXED[problem_id]()
    else:
        m = _SCALED.match(problem_id)
        if not m or int(m.group(2)) < 1:
            raise KeyError(f"unknown problem id {problem_id!r}")
        n = int(m.group(2))
        prob = (make_l1 if m.group(1) == "L1" else make_l2)(n)
        if prob.id != problem_id:  # "L1-n3" aliases "L1"
            prob = _FIXED[m.group(1)]()
    _cache[problem_id] = prob
    return prob


def manifest(include_scaled: bool = True) -> list:
    return [get_problem(pid).to_record() for pid in problem_ids(include_scaled)]


def write_manifest(path, include_scaled: bool = True) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest(include_scaled), indent=2, allow_nan=False,
                               default=_json_default))
    return path


def _json_default(o):
    raise TypeError(f"not serialisable: {o!r}")


def known_optimum_x(problem: MinimaxProblem) -> Optional[np.ndarray]:
    if problem.optimum is None or problem.optimum.x is None:
        return None
    return np.array(problem.optimum.x)
