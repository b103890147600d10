"""Command-line front end: ``corrsets {bound,invariant,reach,simulate,pipeline}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import harness
from .errors import ConfigError, CorrsetsError, InfeasibleError, NumericalError, StageError
from .invariance import synth_invariant

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="JSON experiment config")
    src.add_argument("--preset", choices=sorted(harness.PRESETS))
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out-dir", type=Path, default=Path("out"))
    common.add_argument("--jobs", type=int, default=1, help="worker threads for sampling")
    common.add_argument("--conservative", action="store_true",
                        help="use the (1 - sqrt(lambda))^2 level shrink")
    common.add_argument("--chebyshev", action="store_true",
                        help="distribution-free levels instead of Gaussian ones")
    common.add_argument("--reference-bound", action="store_true",
                        help="use the config's reference_Gw instead of the computed bound")

    parser = argparse.ArgumentParser(prog="corrsets", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("bound", parents=[common], help="compute the correlation bound")
    sub.add_parser("invariant", parents=[common], help="invariant ellipsoid and level table")
    sub.add_parser("reach", parents=[common], help="reachable-set covariance tubes")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo violation study")
    sub.add_parser("pipeline", parents=[common], help="all of the above")
    return parser


def load_config(args):
    cfg = (harness.ExperimentConfig.preset(args.preset) if args.preset
           else harness.ExperimentConfig.load(args.config))
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.conservative:
        changes["conservative"] = True
    if args.chebyshev:
        changes["distribution"] = "chebyshev"
    if args.reference_bound:
        changes["bound_source"] = "reference"
    return cfg.with_overrides(**changes) if changes else cfg


def run(args):
    cfg = load_config(args)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    jobs = args.jobs
    if args.command == "pipeline":
        result = harness.run_pipeline(cfg, jobs=jobs)
        paths = harness.write_pipeline(out, result)
        _echo_summary(result.bound, result.invariant, result.report)
    else:
        bound = harness.run_bound(cfg, jobs)
        paths = []
        if args.command == "bound":
            paths = harness.write_bound(out, cfg, bound)
        inv = None
        if args.command in ("invariant", "simulate"):
            inv = harness._stage("invariant", cfg, synth_invariant, cfg.A, bound.Gw)
        if args.command == "invariant":
            paths = harness.write_invariant(out, cfg, inv, harness.rho_table(cfg, inv.lam))
        elif args.command == "reach":
            result = harness.run_pipeline(cfg, jobs=jobs, simulate=False)
            paths = harness.write_tubes(out, cfg, result.tubes)
        elif args.command == "simulate":
            report = harness.run_violation_study(cfg, inv.W, inv.lam, jobs=jobs)
            paths = harness.write_report(out, report)
            _echo_summary(bound, inv, report)
    for p in paths:
        print(p)


def _echo_summary(bound, inv, report):
    print(f"bound ({bound.source}) trace {np.trace(bound.Gw):.6g}")
    if inv is not None:
        print(f"invariant lambda {inv.lam:.6g}")
    if report is not None:
        for p, m in zip(report.p_v, report.max_frequency()):
            print(f"p_v {p:g}: max violation frequency {m:.4f}")


def exit_code(exc):
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, InfeasibleError):
        return EXIT_INFEASIBLE
    if isinstance(exc, (NumericalError, ArithmeticError, np.linalg.LinAlgError)):
        return EXIT_NUMERICAL
    if isinstance(exc, ValueError):
        return EXIT_CONFIG
    return 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run(args)
    except (CorrsetsError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
