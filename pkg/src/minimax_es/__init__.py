"""Derivative-free minimax optimisation with evolution strategies.

``problems`` holds the benchmark suite, ``reckless`` the ES-based descent
method, ``coevolution`` and ``mmde`` the population baselines, ``oracle``
the regret estimator and ``harness`` the experiment tooling.
"""
from .problems import MinimaxProblem, get_problem, problem_ids
from .reckless import RecklessConfig, run_reckless
from .coevolution import CoevConfig, run_coev_alternating, run_coev_parallel
from .mmde import MmdeConfig, run_mmde
from .oracle import RegretOracle

__version__ = "0.1.0"

__all__ = ["MinimaxProblem", "get_problem", "problem_ids", "RecklessConfig", "run_reckless",
           "CoevConfig", "run_coev_alternating", "run_coev_parallel", "MmdeConfig", "run_mmde",
           "RegretOracle"]
