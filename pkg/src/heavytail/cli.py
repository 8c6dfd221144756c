"""Command-line entry point: one subcommand per experiment.

Exit codes: 0 pass, 1 assertion failure, 2 configuration error, 3 precondition refusal.
HEAVYTAIL_OUT and HEAVYTAIL_THREADS supply --out and --threads when the flags are absent.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .experiments import EXPERIMENTS, load_schema, run_experiment


def _add_common(p):
    p.add_argument("--config", metavar="PATH", help="JSON config file")
    p.add_argument("--out", metavar="DIR", help="output directory (env HEAVYTAIL_OUT)")
    p.add_argument("--seed", type=int, help="seed for sampled oracles")
    p.add_argument("--tol", type=float, help="override the experiment tolerance")
    p.add_argument("--threads", type=int, help="worker threads (env HEAVYTAIL_THREADS)")
    p.add_argument("--quiet", action="store_true", help="print only the final status line")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heavytail", description="Heavy-tailed kernel experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        _add_common(sub.add_parser(name, help=f"run the {name} experiment"))
    _add_common(sub.add_parser("run", help="run the experiment named in --config"))
    sub.add_parser("schema", help="print the config JSON schema")
    return parser


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "schema":
        print(json.dumps(load_schema(), indent=2))
        return 0
    try:
        config = _load_config(args.config)
    except ValueError as exc:
        print(json.dumps({"status": "config-error", "exit_code": 2, "message": str(exc)}))
        return 2
    if not isinstance(config, dict):
        print(json.dumps({"status": "config-error", "exit_code": 2, "message": "config must be a JSON object"}))
        return 2
    if args.command != "run":
        named = config.get("experiment", args.command)
        if named != args.command:
            print(json.dumps({"status": "config-error", "exit_code": 2,
                              "message": f"config names {named!r} but the subcommand is {args.command!r}"}))
            return 2
        config = {**config, "experiment": args.command}
    out = args.out or os.environ.get("HEAVYTAIL_OUT")
    threads = args.threads
    if threads is None and os.environ.get("HEAVYTAIL_THREADS"):
        try:
            threads = int(os.environ["HEAVYTAIL_THREADS"])
        except ValueError:
            print(json.dumps({"status": "config-error", "exit_code": 2, "message": "HEAVYTAIL_THREADS must be an integer"}))
            return 2
    if out is None and "out" not in config:
        out = os.path.join("runs", str(config.get("experiment", "unknown")))
    res = run_experiment(config, out, seed=args.seed, tol=args.tol, threads=threads)
    if not args.quiet:
        for c in res.checks:
            print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['check']}")
    summary = {"experiment": res.experiment, "status": res.status, "exit_code": res.exit_code}
    if res.message:
        summary["message"] = res.message
    if res.artifacts:
        summary["report"] = res.artifacts[-1]
    print(json.dumps(summary))
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
