"""Command-line entry point: plots curves|heatmap|ablation --in ... --out.

Exit status 0 on success; input problems print one diagnostic line to
stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys

import matplotlib.pyplot as plt

from .figures import plot_ablation, plot_curves, plot_heatmap

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots",
        description="render figures from poslab CSV/JSON outputs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curves", help="training curves from metrics CSVs")
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   help="one or more metrics.csv files")
    p.add_argument("--out", required=True, help="output PNG")

    p = sub.add_parser("heatmap", help="goal-score heatmap from grid JSON")
    p.add_argument("--in", dest="inputs", required=True,
                   help="grid.json from a grid evaluation")
    p.add_argument("--out", required=True, help="output PNG")

    p = sub.add_parser("ablation", help="two-panel ablation chart")
    p.add_argument("--in", dest="inputs", required=True,
                   help="summary.json from an ablation sweep")
    p.add_argument("--out", required=True, help="output PNG")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "curves":
            fig = plot_curves(args.inputs, args.out)
        elif args.command == "heatmap":
            fig = plot_heatmap(args.inputs, args.out)
        else:
            fig = plot_ablation(args.inputs, args.out)
    except (ValueError, KeyError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    plt.close(fig)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
