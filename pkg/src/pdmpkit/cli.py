"""Command line front end for the bundled models and experiments.

Each subcommand runs one experiment against a named model bundle and
prints the report as JSON; ``--out`` writes the same report to a file
in JSON or CSV.  Settings come from flags, or from a JSON config file
via ``--config`` with flags taking precedence.
"""
from __future__ import annotations

import argparse
import ast
import json
import sys

from .harness import EXPERIMENTS, dumps_report, write_report
from .models import REGISTRY, get_bundle

EXPERIMENT_NAMES = [name for name in EXPERIMENTS]


def _parse_param(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        value = raw
    return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdmpkit",
        description="simulate piecewise deterministic models and run "
                    "the self-verification experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENT_NAMES:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--model", choices=sorted(REGISTRY),
                       help="model bundle name")
        p.add_argument("--param", action="append", type=_parse_param,
                       default=[], metavar="KEY=VALUE",
                       help="override a model parameter (repeatable)")
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--t", type=float, help="time horizon")
        p.add_argument("--n", type=int, help="number of replications")
        p.add_argument("--seed", type=int, help="base seed")
        p.add_argument("--workers", type=int, help="worker processes")
        p.add_argument("--out", help="write the report to this path")
        p.add_argument("--format", choices=["json", "csv"],
                       help="report file format (default json)")
        if name in ("martingale-check", "is-consistency", "reverse-check",
                    "generator-forms"):
            p.add_argument("--h", dest="h_name",
                           help="named harmonic-style function from the bundle")
        if name == "dynkin-check":
            p.add_argument("--f", "--h", dest="f_name",
                           help="named test function from the bundle")
        if name == "generator-forms":
            p.add_argument("--f", dest="f_name",
                           help="named test function from the bundle")
        if name == "is-consistency":
            p.add_argument("--g", dest="g_name",
                           help="named observable from the bundle")
            p.add_argument("--direction", choices=["tilted", "original"],
                           help="which measure is the target")
    return parser


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _merged_settings(args) -> dict:
    """Config file values with command line flags layered on top."""
    config = _load_config(args.config)
    model_cfg = config.get("model", {})
    exp_cfg = config.get("experiment", {})
    out_cfg = config.get("out", {})
    settings = {
        "model": args.model or model_cfg.get("name"),
        "params": dict(model_cfg.get("params", {})),
        "t": exp_cfg.get("t", 1.0), "n": exp_cfg.get("n", 1000),
        "seed": config.get("rng", {}).get("seed", 0),
        "workers": exp_cfg.get("workers", 1),
        "h": config.get("h"), "f": exp_cfg.get("f"), "g": exp_cfg.get("g"),
        "direction": exp_cfg.get("direction", "tilted"),
        "out": out_cfg.get("path"), "format": out_cfg.get("format", "json"),
    }
    settings["params"].update(dict(args.param))
    for flag, key in (("t", "t"), ("n", "n"), ("seed", "seed"),
                      ("workers", "workers"), ("out", "out"),
                      ("format", "format")):
        value = getattr(args, flag, None)
        if value is not None:
            settings[key] = value
    for flag, key in (("h_name", "h"), ("f_name", "f"), ("g_name", "g"),
                      ("direction", "direction")):
        value = getattr(args, flag, None)
        if value is not None:
            settings[key] = value
    if settings["model"] is None:
        raise SystemExit("no model given: use --model or a config file")
    return settings


def run_command(command: str, settings: dict):
    bundle = get_bundle(settings["model"], **settings["params"])
    common = dict(t=settings["t"], n=settings["n"], seed=settings["seed"],
                  workers=settings["workers"])
    if command == "simulate":
        return EXPERIMENTS[command](bundle, **common)
    if command == "martingale-check":
        return EXPERIMENTS[command](bundle, h=settings["h"], **common)
    if command == "dynkin-check":
        return EXPERIMENTS[command](bundle, f=settings["f"], **common)
    if command == "is-consistency":
        return EXPERIMENTS[command](bundle, h=settings["h"], g=settings["g"],
                                    direction=settings["direction"], **common)
    if command == "reverse-check":
        return EXPERIMENTS[command](bundle, h=settings["h"], **common)
    if command == "generator-forms":
        return EXPERIMENTS[command](bundle, h=settings["h"], f=settings["f"],
                                    **common)
    raise SystemExit(f"unknown command {command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    settings = _merged_settings(args)
    report = run_command(args.command, settings)
    print(dumps_report(report.to_dict()))
    status = "PASS" if report.passed() else "FAIL"
    print(f"{args.command} on {report.model}: {status} "
          f"({report.wall_time:.2f}s)", file=sys.stderr)
    if settings["out"]:
        write_report(report, settings["out"], settings["format"])
    return 0 if report.passed() else 1


if __name__ == "__main__":
    sys.exit(main())
