"""Run the full experiment battery on every bundled model and print a table.

Each row is one (model, experiment) pair with its verdict, the headline
number for that experiment, and the wall time.  Exits nonzero if any
experiment fails, so the script doubles as a smoke check.
"""
import argparse
import sys

from pdmpkit.harness import (
    experiment_dynkin_check, experiment_generator_forms,
    experiment_is_consistency, experiment_martingale_check,
    experiment_reverse_check, experiment_simulate,
)
from pdmpkit.models import REGISTRY, get_bundle


def headline(report) -> str:
    est = report.estimates
    if report.experiment == "simulate":
        return f"jumps {est['jump_count'].mean:.2f}"
    if report.experiment == "martingale-check":
        return f"|mean-1| {est['abs_gap']:.2e}"
    if report.experiment == "dynkin-check":
        return f"|mean-f(x0)| {est['abs_gap']:.2e}"
    if report.experiment == "is-consistency":
        return f"side gap {est['abs_gap']:.2e}"
    if report.experiment == "reverse-check":
        return f"max dev {est['max_abs_dev']:.2e}"
    return f"max rel dev {est['max_rel_dev']:.2e}"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=4000,
                        help="replications per statistical experiment")
    parser.add_argument("--t", type=float, default=1.0, help="time horizon")
    parser.add_argument("--seed", type=int, default=0, help="base seed")
    parser.add_argument("--models", nargs="*", default=sorted(REGISTRY),
                        help="subset of bundled models to run")
    args = parser.parse_args(argv)

    runners = [
        ("simulate", lambda b: experiment_simulate(
            b, t=args.t, n=min(args.n, 1000), seed=args.seed)),
        ("martingale-check", lambda b: experiment_martingale_check(
            b, t=args.t, n=args.n, seed=args.seed)),
        ("dynkin-check", lambda b: experiment_dynkin_check(
            b, t=args.t, n=args.n, seed=args.seed)),
        ("is-consistency", lambda b: experiment_is_consistency(
            b, t=args.t, n=args.n, seed=args.seed)),
        ("reverse-check", lambda b: experiment_reverse_check(
            b, t=args.t, n=args.n, seed=args.seed)),
        ("generator-forms", lambda b: experiment_generator_forms(
            b, t=args.t, n=min(args.n, 100), seed=args.seed)),
    ]
    print(f"{'model':<16} {'experiment':<17} {'verdict':<8} "
          f"{'headline':<22} time")
    failures = 0
    for name in args.models:
        bundle = get_bundle(name)
        for label, run in runners:
            report = run(bundle)
            verdict = "pass" if report.passed() else "FAIL"
            failures += 0 if report.passed() else 1
            print(f"{name:<16} {label:<17} {verdict:<8} "
                  f"{headline(report):<22} {report.wall_time:5.1f}s")
    if failures:
        print(f"{failures} experiment(s) failed", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
