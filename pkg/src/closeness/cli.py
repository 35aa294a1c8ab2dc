"""Command-line front end.

One subcommand per pipeline stage; every subcommand takes the same flags.
Exit codes: 0 on success, 1 on runtime failure (including partially failed
sweeps), 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import sys

from . import pipeline
from .config import load_config
from .errors import ClosenessError, ConfigError

_COMMANDS = (
    ("simulate", pipeline.run_simulate,
     "simulate the configured system and write the trajectory"),
    ("embed", pipeline.run_embed,
     "write delay embeddings of the measured series"),
    ("isometry", pipeline.run_isometry,
     "empirical distance-ratio profiles of the configured maps"),
    ("heuristics", pipeline.run_heuristics,
     "directional coupling heuristics at one coupling value"),
    ("sweep", pipeline.run_sweep,
     "profiles and heuristics across the coupling grid"),
    ("linear-verify", pipeline.run_linear_verify,
     "analytic stable-embedding bounds vs empirical ratios"),
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="closeness",
        description="Distance preservation of delay-embedding maps and "
                    "closeness-based causal heuristics.",
    )
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="COMMAND")
    for name, runner, help_text in _COMMANDS:
        cmd = sub.add_parser(name, help=help_text)
        cmd.set_defaults(runner=runner)
        cmd.add_argument("--config", required=True, metavar="PATH",
                         help="experiment config file (YAML)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
        cmd.add_argument("--out", default=None, metavar="DIR",
                         help="override the output directory")
        cmd.add_argument("--jobs", type=int, default=1,
                         help="worker threads for sweep cells")
        cmd.add_argument("--format", choices=("csv", "json"), default=None,
                         help="override the output format")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("config error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config).with_overrides(
            seed=args.seed, out_dir=args.out, out_format=args.format)
        result = args.runner(cfg, jobs=args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ClosenessError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in result.outputs:
        print(path)
    if result.n_failed:
        print(f"{result.n_failed} grid cell(s) failed; see manifest.json",
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
