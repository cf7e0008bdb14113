"""Experiment sweeps, statistics, reports and the command-line interface."""
from .experiment import (AlgorithmSpec, ExperimentConfig, ResultStore, SweepSummary, run_experiment,
                         run_one, run_rng, solve)
from .reports import EmptyReportError, emit_reports
from .stats import RankMatrix, friedman_test, nemenyi_cd

__all__ = ["AlgorithmSpec", "ExperimentConfig", "ResultStore", "SweepSummary", "run_experiment",
           "run_one", "run_rng", "solve", "EmptyReportError", "emit_reports", "RankMatrix",
           "friedman_test", "nemenyi_cd"]
