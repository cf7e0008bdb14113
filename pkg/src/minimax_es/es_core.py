"""Evolution strategy engines.

* a fixed-covariance NES (stochastic gradient ascent on expected fitness),
  with optional antithetic sampling and fitness standardisation;
* the Monte Carlo descent-direction estimator used at an inner maximiser;
* a plain CMA-ES (rank-one + rank-mu update, cumulative step-size adaptation);
* restart wrappers used for the inner maximisation.

All engines handle box constraints by projecting samples onto the box, take an
explicit ``numpy.random.Generator`` and never touch global random state.
Objective callables are *batch* callables: an ``(m, n)`` array in, ``m``
values out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

BatchFn = Callable[[np.ndarray], np.ndarray]

MINIMIZE = "minimize"
MAXIMIZE = "maximize"


def default_popsize(n: int) -> int:
    """``4 + floor(3 ln n)``, the usual CMA-ES population size."""
    return 4 + int(math.floor(3.0 * math.log(n)))


def _clip(P, bounds):
    if bounds is None:
        return P
    return np.clip(P, bounds[:, 0], bounds[:, 1])


# -- sampling and fitness shaping ---------------------------------------------

def sample_perturbations(rng: np.random.Generator, lam: int, n: int,
                         antithetic: bool = False) -> np.ndarray:
    """Draw ``lam`` standard normal vectors; mirrored pairs if ``antithetic``.

    Mirrored output is ordered ``eps_0, -eps_0, eps_1, -eps_1, ...``.
    """
    if lam < 2:
        raise ValueError(f"population size must be >= 2, got {lam}")
    if not antithetic:
        return rng.standard_normal((lam, n))
    if lam % 2:
        raise ValueError(f"antithetic sampling needs an even population size, got {lam}")
    half = rng.standard_normal((lam // 2, n))
    out = np.empty((lam, n))
    out[0::2] = half
    out[1::2] = -half
    return out


def standardize_fitness(f) -> np.ndarray:
    """Shift to zero mean and scale to unit std; a constant batch maps to zeros."""
    f = np.asarray(f, dtype=float)
    if f.size == 0:
        raise ValueError("cannot standardise an empty batch")
    centred = f - f.mean()
    std = centred.std()
    if std == 0.0 or not np.isfinite(std):
        return np.zeros_like(f)
    return centred / std


# -- NES ----------------------------------------------------------------------

@dataclass(frozen=True)
class NesState:
    mu: np.ndarray
    sigma: float = 0.25
    eta: float = 1e-4
    lam: int = 8
    antithetic: bool = False
    bounds: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.lam < 2:
            raise ValueError("lam must be >= 2")
        if self.antithetic and self.lam % 2:
            raise ValueError("antithetic NES needs an even lam")
        if self.sigma <= 0 or self.eta <= 0:
            raise ValueError("sigma and eta must be positive")
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))


def nes_step(state: NesState, fitnesses, perturbations) -> NesState:
    """One ascent step ``mu += eta / (lam sigma) * sum f_i eps_i``.

    ``fitnesses`` are expected to be standardised already.  The new mean is
    projected onto ``state.bounds``.
    """
    f = np.asarray(fitnesses, dtype=float)
    eps = np.asarray(perturbations, dtype=float)
    if eps.ndim != 2 or len(f) != len(eps) or eps.shape[1] != state.mu.size:
        raise ValueError(f"got {len(f)} fitnesses for perturbations of shape {eps.shape}")
    step = state.eta / (len(f) * state.sigma) * (f @ eps)
    return replace(state, mu=_clip(state.mu + step, state.bounds))


def nes_minimize(fn: BatchFn, x0, budget_units: int, rng: np.random.Generator, *,
                 scale, bounds=None, sigma: float = 0.25, eta: float = 1e-4,
                 lam: Optional[int] = None, antithetic: bool = False) -> np.ndarray:
    """Run NES on ``fn`` for exactly ``budget_units`` evaluations; return the final mean.

    The search runs in coordinates scaled by ``scale`` (the domain width), so
    ``sigma`` and ``eta`` are in units of the domain width.
    """
    scale = np.asarray(scale, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    lam = lam or default_popsize(x0.size)
    if antithetic and lam % 2:
        lam += 1
    unit_bounds = None
    if bounds is not None:
        bounds = np.asarray(bounds, dtype=float)
        unit_bounds = np.column_stack([(bounds[:, 0] - x0) / scale, (bounds[:, 1] - x0) / scale])
    # u = (x - x0) / scale
    state = NesState(np.zeros_like(x0), sigma, eta, lam, antithetic, unit_bounds)
    left = budget_units
    while left > 0:
        m = min(lam, left)
        eps = _partial_perturbations(rng, m, x0.size, antithetic)
        points = _clip(state.mu + sigma * eps, unit_bounds)
        values = np.asarray(fn(_clip(x0 + points * scale, bounds)), dtype=float)
        left -= m
        # ascend on -L; undefined values carry no information
        state = nes_step(state, _shape_with_nans(-values), eps)
    return _clip(x0 + state.mu * scale, bounds)


def _partial_perturbations(rng, m, n, antithetic):
    if not antithetic or m < 2:
        return rng.standard_normal((m, n))
    pairs = sample_perturbations(rng, 2 * (m // 2), n, True)
    if m % 2:
        pairs = np.vstack([pairs, rng.standard_normal((1, n))])
    return pairs


def _shape_with_nans(f):
    ok = np.isfinite(f)
    out = np.zeros_like(f)
    if ok.any():
        out[ok] = standardize_fitness(f[ok])
    return out


def descent_direction(L_at: BatchFn, x, sigma: float, lam: int,
                      rng: np.random.Generator, antithetic: bool = True) -> np.ndarray:
    """Monte Carlo descent direction ``-(1/(sigma lam)) sum L(x + sigma eps_i) eps_i``.

    ``L_at`` maps a batch of x's to ``L(x, y*)`` at a fixed inner maximiser
    ``y*``.  Exactly ``lam`` evaluations are made.  Mirrored sampling is on by
    default: without it the ``L(x) eps / sigma`` term dominates the variance
    for small ``sigma``.
    """
    x = np.asarray(x, dtype=float)
    eps = sample_perturbations(rng, lam, x.size, antithetic)
    values = np.asarray(L_at(x + sigma * eps), dtype=float)
    return -(values @ eps) / (sigma * lam)


# -- CMA-ES -------------------------------------------------------------------

class CMAES:
    """Compact CMA-ES with projection onto a box.

    Parameters
    ----------
    mean : array_like
        Initial distribution mean.
    sigma : float
        Initial step size, relative to ``stds``.
    stds : array_like, optional
        Per-coordinate scaling of the initial covariance, ``C0 = diag(stds**2)``.
    bounds : ndarray, optional
        ``(n, 2)`` box; sampled points are clipped into it.
    lam : int, optional
        Population size, default ``4 + floor(3 ln n)``.
    antithetic : bool
        Mirrored sampling of the standard normal vectors.
    """

    def __init__(self, mean, sigma: float, stds=None, bounds=None, lam: Optional[int] = None,
                 antithetic: bool = False):
        self.mean = np.array(mean, dtype=float)
        n = self.n = self.mean.size
        self.sigma = float(sigma)
        self.bounds = None if bounds is None else np.asarray(bounds, dtype=float)
        lam = lam or default_popsize(n)
        if antithetic and lam % 2:
            lam += 1
        self.lam = lam
        self.antithetic = antithetic

        mu = lam // 2
        w = math.log((lam + 1) / 2.0) - np.log(np.arange(1, mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights ** 2)
        self.cc = (4 + self.mueff / n) / (n + 4 + 2 * self.mueff / n)
        self.cs = (self.mueff + 2) / (n + self.mueff + 5)
        self.c1 = 2 / ((n + 1.3) ** 2 + self.mueff)
        self.cmu = min(1 - self.c1,
                       2 * (self.mueff - 2 + 1 / self.mueff) / ((n + 2) ** 2 + self.mueff))
        self.damps = 1 + 2 * max(0.0, math.sqrt((self.mueff - 1) / (n + 1)) - 1) + self.cs
        self.chiN = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

        stds = np.ones(n) if stds is None else np.broadcast_to(np.asarray(stds, float), (n,))
        self.C = np.diag(stds ** 2)
        self.pc = np.zeros(n)
        self.ps = np.zeros(n)
        self.generation = 0
        self._decompose()

    def _decompose(self):
        C = self.C
        C = (C + C.T) * 0.5
        evals, B = np.linalg.eigh(C)
        floor = 1e-14 * max(float(evals.sum()), 1e-300) / self.n
        if evals[0] < floor:
            evals = np.maximum(evals, floor)
            C = (B * evals) @ B.T
        self.C = C
        self.B, self.D = B, np.sqrt(evals)
        self.invsqrtC = (B / self.D) @ B.T

    def ask(self, rng: np.random.Generator, m: Optional[int] = None) -> np.ndarray:
        """Sample ``m`` (default ``lam``) points from ``N(mean, sigma^2 C)``, clipped."""
        m = self.lam if m is None else m
        if self.antithetic and m >= 2:
            z = sample_perturbations(rng, 2 * (m // 2), self.n, True)
            if m % 2:
                z = np.vstack([z, rng.standard_normal((1, self.n))])
        else:
            z = rng.standard_normal((m, self.n))
        points = self.mean + (self.sigma * z * self.D) @ self.B.T
        return _clip(points, self.bounds)

    def tell(self, points, fitnesses, mode: str = MINIMIZE) -> "CMAES":
        """Rank-based update from a full generation of ``lam`` evaluated points."""
        points = np.asarray(points, dtype=float)
        f = np.asarray(fitnesses, dtype=float)
        if len(points) != self.lam or len(f) != self.lam:
            raise ValueError(f"expected {self.lam} points and fitnesses, "
                             f"got {len(points)} and {len(f)}")
        if mode == MAXIMIZE:
            f = -f
        elif mode != MINIMIZE:
            raise ValueError(f"unknown mode {mode!r}")
        nan = np.isnan(f)
        if nan.any():
            f = np.where(nan, np.inf, f)
        order = np.argsort(f, kind="stable")[: len(self.weights)]
        cs, cc, c1, cmu, sigma = self.cs, self.cc, self.c1, self.cmu, self.sigma
        old = self.mean
        Y = (points[order] - old) / sigma
        step = self.weights @ Y
        self.mean = old + sigma * step
        self.ps = (1 - cs) * self.ps + math.sqrt(cs * (2 - cs) * self.mueff) * (self.invsqrtC @ step)
        self.generation += 1
        ps_norm = math.sqrt(float(self.ps @ self.ps))
        hsig = (ps_norm / math.sqrt(1 - (1 - cs) ** (2 * self.generation)) / self.chiN
                < 1.4 + 2 / (self.n + 1))
        self.pc = (1 - cc) * self.pc + (math.sqrt(cc * (2 - cc) * self.mueff) * step if hsig else 0.0)
        decay = 1 - c1 - cmu + (0.0 if hsig else c1 * cc * (2 - cc))
        self.C = decay * self.C + c1 * np.outer(self.pc, self.pc) + cmu * ((Y.T * self.weights) @ Y)
        self.sigma = max(sigma * math.exp(min(1.0, (cs / self.damps) * (ps_norm / self.chiN - 1))),
                         1e-300)
        self._decompose()
        return self

    def stop(self, tolx: float = 1e-12, maxcond: float = 1e14) -> bool:
        """True once the distribution has collapsed or become ill-conditioned."""
        return bool(self.sigma * self.D.max() < tolx
                    or (self.D.max() / self.D.min()) ** 2 > maxcond)

    def state_vector(self) -> np.ndarray:
        """Flattened mean, step size, paths and covariance, for comparisons."""
        return np.concatenate([self.mean, [self.sigma], self.ps, self.pc, self.C.ravel()])


def cma_minimize(fn: BatchFn, x0, budget_units: int, rng: np.random.Generator, *,
                 scale, bounds=None, sigma: float = 0.25,
                 lam: Optional[int] = None, antithetic: bool = False) -> tuple:
    """Run CMA-ES (no restarts) for exactly ``budget_units`` evaluations.

    Returns ``(final_mean, best_x, best_value)``.  A trailing partial
    generation is evaluated but not used for an update.
    """
    es = CMAES(x0, sigma, stds=scale, bounds=bounds, lam=lam, antithetic=antithetic)
    best_x, best_f = np.asarray(x0, dtype=float), math.inf
    left = budget_units
    while left > 0:
        m = min(es.lam, left)
        pts = es.ask(rng, m)
        vals = np.asarray(fn(pts), dtype=float)
        left -= m
        i = _nanargmin(vals)
        if i is not None and vals[i] < best_f:
            best_x, best_f = pts[i].copy(), float(vals[i])
        if m == es.lam:
            es.tell(pts, vals, MINIMIZE)
    return _clip(es.mean, es.bounds), best_x, best_f


def _nanargmin(v):
    if np.all(np.isnan(v)):
        return None
    return int(np.nanargmin(v))


# -- restarts -----------------------------------------------------------------

@dataclass(frozen=True)
class RestartPolicy:
    """When to re-initialise an inner CMA-ES run.

    ``stagnation_window=None`` means ``10 + ceil(30 n / lam)`` generations.
    ``max_restarts=None`` allows restarts until the budget is spent.
    """

    max_restarts: Optional[int] = None
    stagnation_tolerance: float = 1e-9
    stagnation_window: Optional[int] = None

    def __post_init__(self):
        if self.stagnation_tolerance <= 0:
            raise ValueError("stagnation_tolerance must be positive")
        if self.stagnation_window is not None and self.stagnation_window < 1:
            raise ValueError("stagnation_window must be >= 1")
        if self.max_restarts is not None and self.max_restarts < 0:
            raise ValueError("max_restarts must be non-negative")

    def window(self, n: int, lam: int) -> int:
        if self.stagnation_window is not None:
            return self.stagnation_window
        return 10 + math.ceil(30 * n / lam)


class MaxResult(NamedTuple):
    y: np.ndarray
    value: float
    evaluations: int
    restarts: int


def maximize_with_restarts(fn: BatchFn, bounds, budget_units: int,
                           policy: RestartPolicy = RestartPolicy(),
                           rng: Optional[np.random.Generator] = None, *,
                           y0=None, sigma: float = 0.25,
                           lam: Optional[int] = None) -> MaxResult:
    """Maximise ``fn`` over a box with CMA-ES, restarting on stagnation.

    The first run starts at ``y0`` (uniform if omitted), every restart at a
    uniform point.  At most ``budget_units`` evaluations are made; the best
    point seen over all runs is returned.
    """
    rng = np.random.default_rng() if rng is None else rng
    bounds = np.asarray(bounds, dtype=float)
    lo, width = bounds[:, 0], bounds[:, 1] - bounds[:, 0]
    n = len(bounds)
    start = lo + rng.random(n) * width if y0 is None else np.asarray(y0, dtype=float)
    best_y, best_f = start.copy(), -math.inf
    used, restarts = 0, 0
    while used < budget_units:
        es = CMAES(start, sigma, stds=width, bounds=bounds, lam=lam)
        window = policy.window(n, es.lam)
        history = []
        run_best = -math.inf
        stagnated = False
        while used < budget_units:
            m = min(es.lam, budget_units - used)
            pts = es.ask(rng, m)
            vals = np.asarray(fn(pts), dtype=float)
            used += m
            if not np.all(np.isnan(vals)):
                i = int(np.nanargmax(vals))
                if vals[i] > best_f or best_f == -math.inf:
                    best_y, best_f = pts[i].copy(), float(vals[i])
                run_best = max(run_best, float(vals[i]))
            if m < es.lam:
                break
            es.tell(pts, vals, MAXIMIZE)
            history.append(run_best)
            if len(history) > window and history[-1] - history[-1 - window] < policy.stagnation_tolerance:
                stagnated = True
                break
            if es.stop():
                stagnated = True
                break
        if not stagnated or used >= budget_units:
            break
        if policy.max_restarts is not None and restarts >= policy.max_restarts:
            break
        restarts += 1
        start = lo + rng.random(n) * width
    return MaxResult(best_y, best_f, used, restarts)
