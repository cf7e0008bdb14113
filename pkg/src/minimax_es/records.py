"""Run records shared by all minimax algorithms."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class SolutionRecord:
    """A pair ``(x, y)``, its objective value and the evaluations spent when recorded."""

    x: np.ndarray
    y: np.ndarray
    value: float
    evaluations: int

    def to_dict(self) -> dict:
        return {"x": np.asarray(self.x).tolist(), "y": np.asarray(self.y).tolist(),
                "value": _finite_or_none(self.value), "evaluations": int(self.evaluations)}


@dataclass
class RunTrace:
    algorithm: str
    problem_id: str
    seed: Optional[int]
    config: dict
    best: SolutionRecord
    evaluations: int
    history: list = field(default_factory=list)

    def to_dict(self, with_history: bool = False) -> dict:
        out = {"algorithm": self.algorithm, "problem": self.problem_id, "seed": self.seed,
               "config": self.config, "best": self.best.to_dict(),
               "evaluations": int(self.evaluations)}
        if with_history:
            out["history"] = [h.to_dict() for h in self.history]
        return out


def _finite_or_none(v):
    v = float(v)
    return v if np.isfinite(v) else None
