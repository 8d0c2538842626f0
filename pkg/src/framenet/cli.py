"""Command-line entry point.

Subcommands: gen-data, train, eval, analyze, sweep. Every command takes
--config PATH (JSON experiment config), --seed N (master seed override
threaded through all seeded stages), and --out DIR.

Exit codes: 0 success, 1 configuration/validation error, 2 numerical
failure (divergence/overflow), 3 I/O or file-format error.

The FRAMENET_THREADS environment variable caps internal numeric
parallelism (BLAS thread pools); it must be honored before numpy loads,
which is why the heavy imports happen inside main().
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_IO = 3

_THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def _configure_threads() -> None:
    cap = os.environ.get("FRAMENET_THREADS")
    if not cap:
        return  # default: all cores
    for var in _THREAD_ENV_VARS:
        os.environ.setdefault(var, cap)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment config")
    common.add_argument(
        "--seed", type=int, metavar="U64", help="master seed overriding all config seeds"
    )
    common.add_argument(
        "--out", default=".", metavar="DIR", help="output directory (default: .)"
    )

    parser = argparse.ArgumentParser(
        prog="framenet",
        description="Frame-classification toolkit: synthetic data, "
        "dense/conv/untied network training, and coding analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="generate a synthetic dataset file")
    p.add_argument(
        "--permute",
        action="store_true",
        help="apply a seeded fixed permutation to feature columns (structure control)",
    )

    p = sub.add_parser("train", parents=[common], help="train a network on a dataset file")
    p.add_argument("data", help="dataset file (.frn binary or .csv)")
    p.add_argument("--dev", metavar="PATH", help="explicit dev dataset (else split per config)")
    p.add_argument("--resume", metavar="CKPT", help="continue training from a checkpoint")

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on a dataset")
    p.add_argument("model", help="checkpoint file")
    p.add_argument("data", help="dataset file")
    p.add_argument(
        "--priors",
        action="store_true",
        help="also report prior-scaled score argmax accuracy",
    )

    p = sub.add_parser("analyze", parents=[common], help="emit coding-property CSVs")
    p.add_argument("model", help="checkpoint file")
    p.add_argument("data", help="dataset file")

    p = sub.add_parser("sweep", parents=[common], help="size/depth/optimizer sweep")
    p.add_argument(
        "--data", metavar="PATH", help="dataset file (default: generate per config)"
    )
    return parser


def _run(args) -> int:
    # Imported here so FRAMENET_THREADS is in force before numpy loads.
    from . import commands
    from .config import apply_master_seed, load_config

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = apply_master_seed(cfg, args.seed)
    out_dir = Path(args.out)

    if args.command == "gen-data":
        commands.cmd_gen_data(cfg, out_dir, permute=args.permute)
    elif args.command == "train":
        commands.cmd_train(
            cfg, args.data, out_dir, dev_path=args.dev, resume_path=args.resume
        )
    elif args.command == "eval":
        commands.cmd_eval(cfg, args.model, args.data, args.priors, out_dir)
    elif args.command == "analyze":
        commands.cmd_analyze(cfg, args.model, args.data, out_dir)
    elif args.command == "sweep":
        commands.cmd_sweep(cfg, out_dir, data_path=args.data)
    else:  # pragma: no cover - argparse enforces choices
        raise AssertionError(args.command)
    return EXIT_OK


def main(argv=None) -> int:
    _configure_threads()
    args = build_parser().parse_args(argv)
    from .config import ConfigError
    from .data import FormatError
    from .numerics import NumericError, ParameterError, ShapeError
    from .training import DivergenceError

    try:
        return _run(args)
    except (ConfigError, ParameterError, ShapeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, NumericError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, OSError) as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
