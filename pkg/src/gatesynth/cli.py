"""Command line entry point: ``gatesynth run`` and ``gatesynth sweep``."""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, InvalidInputError, NoFiniteConditioningError
from .experiment import OUTPUT_ENV, campaign_norm_sweep, load_config, run_experiment


def _norm_list(text: str) -> list:
    try:
        norms = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {text!r}") from None
    if not norms:
        raise argparse.ArgumentTypeError("norm list is empty")
    if any(n < 0 for n in norms):
        raise argparse.ArgumentTypeError("norms must be non-negative")
    return norms


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="INI experiment configuration")
    common.add_argument("--out", help=f"output directory (default: config, then ${OUTPUT_ENV}, then ./runs)")
    common.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    common.add_argument("--seed-offset", type=int, default=0, help="added to every configured seed")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gatesynth", description="Quantum gate pulse synthesis experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="solve once per configured seed")
    sweep = sub.add_parser("sweep", parents=[common], help="initial-norm campaign")
    sweep.add_argument("--norms", type=_norm_list, required=True, help="comma separated initial norms")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("gatesynth: error: --workers must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            status, files = run_experiment(cfg, args.out, args.workers, args.seed_offset)
        else:
            status, _, files = campaign_norm_sweep(cfg, args.norms, args.out, args.workers,
                                                   args.seed_offset)
    except (ConfigError, InvalidInputError, NoFiniteConditioningError) as exc:
        print(f"gatesynth: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"gatesynth: I/O error: {exc}", file=sys.stderr)
        return 3
    for f in files:
        print(f)
    return status


if __name__ == "__main__":
    sys.exit(main())
