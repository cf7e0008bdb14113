"""Command-line front end: ``minimax-es {run,solve,regret,report,verify}``.

Exit status is 0 on success, 1 when a check fails or a report slice is
empty, and 2 for usage or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..oracle import RegretOracle
from ..problems import get_problem
from .experiment import (RESULTS_FILE, AlgorithmSpec, ExperimentConfig, ResultStore,
                         default_output_dir, run_experiment, run_one)
from .reports import KINDS, EmptyReportError, emit_reports
from .verify import check_descent, check_schedule

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_vector(text: str) -> np.ndarray:
    text = text.strip()
    try:
        v = json.loads(text) if text.startswith("[") else [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse vector {text!r}: {exc}") from None
    return np.atleast_1d(np.asarray(v, dtype=float))


def _out_dir(args) -> Path:
    return Path(args.output) if args.output else default_output_dir()


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="minimax-es", description="Derivative-free minimax optimisation toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an experiment sweep from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--output", help="output directory (overrides the config and environment)")
    r.add_argument("--workers", type=int)

    s = sub.add_parser("solve", help="run one algorithm on one problem")
    s.add_argument("--problem", required=True)
    s.add_argument("--algo", default="reckless:CR")
    s.add_argument("--fes", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--params", default="{}", help="JSON object of algorithm hyperparameters")

    g = sub.add_parser("regret", help="oracle worst case and regret of a given x")
    g.add_argument("--problem", required=True)
    g.add_argument("--x", required=True, help="comma-separated values or a JSON list")

    rep = sub.add_parser("report", help="write CSV reports from a result store")
    rep.add_argument("--kind", choices=KINDS, required=True)
    rep.add_argument("--output", help="directory holding results.jsonl")
    rep.add_argument("--budget", type=int)
    rep.add_argument("--alpha", type=float, default=0.05)

    v = sub.add_parser("verify", help="schedule fixture and descent-direction agreement checks")
    v.add_argument("--points", type=int, default=20)
    v.add_argument("--seed", type=int, default=0)
    return p


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.output:
        cfg.output_dir = args.output
    if args.workers:
        cfg.workers = args.workers
    summary = run_experiment(cfg)
    print(f"completed {summary.completed}, skipped {summary.skipped}, failed {summary.failed}; "
          f"results in {cfg.out / RESULTS_FILE}")
    return EXIT_OK if summary.failed == 0 else EXIT_FAIL


def _cmd_solve(args) -> int:
    try:
        params = json.loads(args.params)
    except ValueError as exc:
        raise UsageError(f"--params is not JSON: {exc}") from None
    if not isinstance(params, dict):
        raise UsageError("--params must be a JSON object")
    spec = AlgorithmSpec.parse({"id": args.algo, "params": params})
    rec = run_one(args.problem, spec, args.fes, args.seed, RegretOracle())
    print(json.dumps(rec, sort_keys=True))
    return EXIT_OK


def _cmd_regret(args) -> int:
    problem = get_problem(args.problem)
    x = _parse_vector(args.x)
    if x.size != problem.n_x:
        raise UsageError(f"{problem.id} needs {problem.n_x} coordinates, got {x.size}")
    if not problem.in_x(x[None, :])[0]:
        raise UsageError(f"x lies outside the domain of {problem.id}")
    found = RegretOracle().inner_argmax(problem, x)
    opt = problem.optimum.value if problem.optimum is not None else 0.0
    print(json.dumps({"problem": problem.id, "x": x.tolist(), "worst_y": found.y.tolist(),
                      "worst_case": found.value, "regret": found.value - opt,
                      "member": found.member}, sort_keys=True))
    return EXIT_OK


def _cmd_report(args) -> int:
    out = _out_dir(args)
    records = ResultStore(out / RESULTS_FILE).records()
    paths = emit_reports(records, args.kind, out / "reports", budget=args.budget, alpha=args.alpha)
    for path in paths:
        print(path)
    return EXIT_OK


def _cmd_verify(args) -> int:
    ok = True
    print("schedule cells (#FEs, s): expected (T, (1-s)v, sv) -> got")
    for c in check_schedule():
        ok &= c.ok
        print(f"  {'PASS' if c.ok else 'FAIL'} ({c.fes}, {c.s}): {c.expected} -> {c.got}")
    checks = check_descent(points=args.points, seed=args.seed)
    for pid in dict.fromkeys(c.problem for c in checks):
        cos = [c.cosine for c in checks if c.problem == pid]
        good = sum(v > 0.95 for v in cos)
        passed = good >= len(cos) - max(1, len(cos) // 20)
        ok &= passed
        print(f"  {'PASS' if passed else 'FAIL'} descent agreement {pid}: "
              f"{good}/{len(cos)} cosines > 0.95 (min {min(cos):.6f})")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"run": _cmd_run, "solve": _cmd_solve, "regret": _cmd_regret,
            "report": _cmd_report, "verify": _cmd_verify}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except EmptyReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (UsageError, ValueError, TypeError, KeyError) as exc:
        # config classes raise ValueError subclasses; bad hyperparameter names raise TypeError
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
