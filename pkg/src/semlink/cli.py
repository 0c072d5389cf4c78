"""Command-line experiment runner.

Commands: prepare, train, sweep, modexp, gradcheck. Shared flags:
--config PATH (JSON, merged over defaults), --seed N, --out DIR,
--workers N. Exit codes: 0 success, 1 usage/config error, 2 runtime failure.
"""

import argparse
import sys

from . import experiment
from .experiment import ConfigError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semlink",
        description="Semantic-HARQ / learned-constellation link simulator")
    parser.add_argument("--config", help="JSON config file", default=None)
    parser.add_argument("--seed", type=int, default=None,
                        help="override the global seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes for sweeps")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", help="build splits, vocab, Huffman table, LDPC code")
    train = sub.add_parser("train", help="train the codec or the constellation")
    train.add_argument("target", choices=["codec", "constellation"])
    sub.add_parser("sweep", help="run the HARQ success-rate sweep")
    sub.add_parser("modexp", help="run the modulation comparison")
    sub.add_parser("gradcheck", help="finite-difference check of the codec")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        cfg = experiment.load_config(args.config, seed=args.seed,
                                     out_dir=args.out, workers=args.workers)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "prepare":
            experiment.stage_prepare(cfg)
        elif args.command == "train":
            experiment.stage_train(cfg, args.target)
        elif args.command == "sweep":
            experiment.stage_sweep(cfg)
        elif args.command == "modexp":
            experiment.stage_modexp(cfg)
        elif args.command == "gradcheck":
            err = experiment.stage_gradcheck(cfg)
            if err >= 1e-4:
                print("gradient check FAILED", file=sys.stderr)
                return 2
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
