"""Standalone figure renderer for harness CSVs.

Usage: ``plots tradeoff <sweep_csv> <out_image> [--loss-column NAME]`` and
``plots queryprob <round_log_csv> <out_image> [--window N]``. Output format
follows the file extension (.png or .svg).
"""

from __future__ import annotations

import argparse
import sys

from .csvio import SchemaError
from .render import render_query_prob, render_tradeoff


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plots", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_trade = sub.add_parser("tradeoff", help="query-loss tradeoff curves with error bars")
    p_trade.add_argument("csv")
    p_trade.add_argument("out")
    p_trade.add_argument("--loss-column", default="regret_R")

    p_prob = sub.add_parser("queryprob", help="smoothed per-round query probability trace")
    p_prob.add_argument("csv")
    p_prob.add_argument("out")
    p_prob.add_argument("--window", type=int, default=20)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "tradeoff":
            series = render_tradeoff(args.csv, args.out, loss_column=args.loss_column)
            print(f"wrote {args.out} ({len(series)} series)")
        else:
            ts, _ = render_query_prob(args.csv, args.out, smoothing_window=args.window)
            print(f"wrote {args.out} ({len(ts)} rounds)")
        return 0
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
