"""Friedman test and Nemenyi critical difference over per-problem mean regrets."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats


class ConfigError(ValueError):
    pass


# Two-tailed Nemenyi critical values q_alpha for k = 2..10 (studentized range
# statistic divided by sqrt(2), infinite degrees of freedom), as tabulated by
# Demsar (2006), Table 5.
Q_TABLE = {
    0.05: (1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164),
    0.10: (1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920),
}


@dataclass
class RankMatrix:
    """Rows are evaluators (problems), columns algorithms; lower value ranks first."""

    problems: Sequence[str]
    algorithms: Sequence[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.problems), len(self.algorithms)):
            raise ConfigError("values must be problems x algorithms")

    @property
    def ranks(self) -> np.ndarray:
        """Per-row ranks with midranks for ties."""
        return np.vstack([stats.rankdata(row) for row in self.values])

    @property
    def average_ranks(self) -> np.ndarray:
        return self.ranks.mean(axis=0)


def friedman_statistic(ranks) -> float:
    """``12N/(k(k+1)) * (sum_j R_j^2 - k(k+1)^2/4)`` with ``R_j`` the average ranks."""
    r = np.asarray(ranks, dtype=float)
    N, k = r.shape
    R = r.mean(axis=0)
    return float(12.0 * N / (k * (k + 1)) * (np.sum(R ** 2) - k * (k + 1) ** 2 / 4.0))


def friedman_test(rm: RankMatrix):
    """``(statistic, p_value)`` with the chi-square approximation on ``k - 1`` dof."""
    N, k = rm.values.shape
    if k < 2 or N < 2:
        raise ConfigError("the Friedman test needs at least 2 algorithms and 2 evaluators")
    chi2 = friedman_statistic(rm.ranks)
    chi2 = max(chi2, 0.0)  # round-off on fully tied rows
    return chi2, float(stats.chi2.sf(chi2, k - 1))


def nemenyi_cd(k: int, N: int, alpha: float = 0.05) -> float:
    """Critical difference ``q_alpha(k) sqrt(k(k+1)/(6N))`` between average ranks."""
    table = Q_TABLE.get(alpha)
    if table is None:
        raise ConfigError(f"alpha must be one of {sorted(Q_TABLE)}")
    if not 2 <= k <= len(table) + 1:
        raise ConfigError(f"k must lie in [2, {len(table) + 1}]")
    if N < 1:
        raise ConfigError("N must be positive")
    return table[k - 2] * math.sqrt(k * (k + 1) / (6.0 * N))


def pairwise_significance(rm: RankMatrix, alpha: float = 0.05):
    """``(a, b, |rank_a - rank_b|, significant)`` for every pair of algorithms."""
    avg = rm.average_ranks
    cd = nemenyi_cd(len(rm.algorithms), len(rm.problems), alpha)
    out = []
    for i in range(len(avg)):
        for j in range(i + 1, len(avg)):
            diff = abs(avg[i] - avg[j])
            out.append((rm.algorithms[i], rm.algorithms[j], float(diff), bool(diff > cd)))
    return out
