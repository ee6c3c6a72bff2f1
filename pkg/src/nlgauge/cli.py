"""Command line entry point.

Precedence: built-in defaults < ``--config`` file < explicit flags.

Exit codes: 0 all checks passed, 1 an acceptance check failed,
2 usage or configuration error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiments import SELECTORS, ConfigError, RunConfig, run_experiment
from .hodge import SolverError
from .system import SystemSolveError

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlgauge", description="Nonlocal gauge experiments on a 1D grid.")
    p.add_argument("experiment", choices=SELECTORS)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--trace", action="store_true", default=None, help="record per-iteration histories")
    p.add_argument("--format", choices=("json", "csv", "both"), help="artifact format")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key; VALUE is parsed as JSON (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_config(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{args.config}: config root must be a JSON object")
    for item in args.set:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set {item!r}: expected KEY=VALUE")
        try:
            data[key] = json.loads(raw)
        except json.JSONDecodeError:
            data[key] = raw
    data["experiment"] = args.experiment
    for key in ("seed", "out", "trace", "format"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        rep = run_experiment(cfg)
    except (SolverError, SystemSolveError) as exc:
        print(f"solver failure in {cfg.experiment}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for name, ok in rep.checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"{cfg.experiment}: {'passed' if rep.passed else 'FAILED'} in {rep.wall_clock:.2f}s -> {cfg.out}")
    return EXIT_PASS if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
