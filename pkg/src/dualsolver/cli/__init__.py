"""Command-line front end: ``dualsolver solve|ellipticity|acceptance``."""
from __future__ import annotations

import argparse
import os
import sys

from ..errors import DualSolverError, SchemaError
from .acceptance import run_all
from .runners import RunReport, run_problem
from .schema import load_problem, validate_problem

__all__ = ["RunReport", "load_problem", "main", "run_problem", "validate_problem"]

EXIT_OK, EXIT_SOLVER, EXIT_SCHEMA = 0, 1, 2


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="directory for report and CSV artifacts")
    common.add_argument("--seed", type=int, default=None,
                        help="random seed (fallback: $DUALSOLVER_SEED, then 0)")
    common.add_argument("--tol-inner", type=float, default=None)
    common.add_argument("--tol-outer", type=float, default=None)
    common.add_argument("--max-iter", type=int, default=None)

    ap = argparse.ArgumentParser(prog="dualsolver", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("solve", "solve a problem file"),
                        ("ellipticity", "run an ellipticity scan from a problem file")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("problem", help="path to a JSON problem file")
    sub.add_parser("acceptance", parents=[common], help="run the acceptance suite")
    return ap


def _seed(args, environ):
    if args.seed is not None:
        return args.seed
    raw = environ.get("DUALSOLVER_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SchemaError(f"DUALSOLVER_SEED must be an integer, got {raw!r}", "DUALSOLVER_SEED")


def _out_dir(args, problem_path):
    if args.out:
        return args.out
    stem = os.path.splitext(os.path.basename(problem_path))[0]
    return os.path.join(os.getcwd(), f"{stem}_out")


def cmd_solve(args, environ, expect_kind=None):
    problem = load_problem(args.problem)
    if expect_kind is not None and problem["kind"] != expect_kind:
        raise SchemaError(f"this subcommand needs kind {expect_kind!r}", "kind")
    overrides = {"seed": _seed(args, environ), "tol_inner": args.tol_inner,
                 "tol_outer": args.tol_outer, "max_iter": args.max_iter}
    try:
        return run_problem(problem, _out_dir(args, args.problem), overrides)
    except ValueError as exc:
        # parameter values that pass the schema but not the model constructors
        raise SchemaError(str(exc), "system") from exc


def cmd_acceptance(args, environ, out=print):
    results = run_all(environ, out=out)
    failed = [r.number for r in results if not r.passed]
    summary = (f"PASS all {len(results)} criteria" if not failed
               else f"FAIL criteria {', '.join(map(str, failed))}")
    out(summary)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "acceptance.txt"), "w") as fh:
            fh.write("\n".join([r.line() for r in results] + [summary]) + "\n")
    return EXIT_OK if not failed else EXIT_SOLVER


def main(argv=None, environ=None):
    environ = os.environ if environ is None else environ
    args = _parser().parse_args(argv)
    try:
        if args.command == "acceptance":
            return cmd_acceptance(args, environ)
        report = cmd_solve(args, environ,
                           "ellipticity" if args.command == "ellipticity" else None)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except DualSolverError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(report.text())
    return EXIT_OK if report.converged else EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
