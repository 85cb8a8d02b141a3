"""Command line entry point: ``v2xric <experiment> --config <path> --out <dir> [--seed N ...]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import EXPERIMENTS, ConfigError, parse_config, validate
from .experiments import run_experiment
from .ric import InvariantViolation

log = logging.getLogger("v2xric")

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="v2xric", description="Run one V2X xApp experiment and write CSV results.")
    p.add_argument("experiment", help=f"one of: {', '.join(EXPERIMENTS)}")
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, action="append", help="seed (repeatable); overrides the config")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {args.experiment!r}")
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        cfg = parse_config(text, experiment=args.experiment)
        if args.seed:
            cfg = replace(cfg, seeds=tuple(args.seed))
            validate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        paths = run_experiment(cfg, args.out)
    except InvariantViolation as exc:
        print(f"invariant violated: {exc.name}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    for p in paths:
        log.info("wrote %s", p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
