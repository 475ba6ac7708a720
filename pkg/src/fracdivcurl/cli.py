"""Command line driver.

    fracdivcurl list
    fracdivcurl run CONFIG [--seed N] [--threads N] [--out DIR]

Exit codes: 0 success, 1 convergence demanded but not reached, 2 config
error, 3 precondition violation.
"""
from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .experiments import EXPERIMENTS, ConfigError, ConvergenceError, parse_config, run_experiment

EXIT_OK = 0
EXIT_CONVERGENCE = 1
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3


def _write_json(path: Path, data):
    path.write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _write_trace(path: Path, rows):
    fieldnames = []
    for row in rows:
        for key in row:
            if key not in fieldnames:
                fieldnames.append(key)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames or ["empty"])
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def cmd_list(args) -> int:
    width = max(len(name) for name in EXPERIMENTS)
    for exp in EXPERIMENTS.values():
        print(f"{exp.name:<{width}}  {exp.description}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.parameters["threads"] = args.threads
    if args.out is not None:
        cfg.output = args.out

    out = Path(cfg.output)
    start = time.perf_counter()
    status = EXIT_OK
    try:
        report, rows = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ValueError, IndexError) as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION

    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "report.json", report)
        _write_trace(out / "trace.csv", rows)
        meta = {
            "config": cfg.to_dict(),
            "versions": {
                "fracdivcurl": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "wall_time_s": time.perf_counter() - start,
        }
        _write_json(out / "meta.json", meta)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{cfg.name}: wrote {out / 'report.json'}")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracdivcurl", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_list = sub.add_parser("list", help="list available experiments")
    p_list.set_defaults(func=cmd_list)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to the INI experiment file")
    p_run.add_argument("--seed", type=int, help="override the master seed")
    p_run.add_argument("--threads", type=int, help="worker threads for trial loops")
    p_run.add_argument("--out", help="output directory (overrides the config)")
    p_run.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
