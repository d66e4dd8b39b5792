"""Batch entry points: `plotviz contour ...` and `plotviz table ...`."""

from __future__ import annotations

import argparse
import sys

from .contour import PlotJob, render_kde_contour
from .tables import render_metric_table


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plotviz", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("contour", help="side-by-side KDE contour panels")
    p.add_argument("--model-csv", required=True)
    p.add_argument("--truth-csv", required=True)
    p.add_argument("--x", default="y_1", help="outcome column for the x axis")
    p.add_argument("--y", default="y_2", help="outcome column for the y axis")
    p.add_argument("--unit", type=int, default=None, help="filter by unit_id")
    p.add_argument("--arm", type=int, default=None, help="filter by treatment")
    p.add_argument("--resolution", type=int, default=120)
    p.add_argument("--out", required=True)

    p = sub.add_parser("table", help="formatted metric table")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    try:
        if args.command == "contour":
            job = PlotJob(
                model_csv=args.model_csv,
                truth_csv=args.truth_csv,
                outcome_x=args.x,
                outcome_y=args.y,
                output_path=args.out,
                resolution=args.resolution,
                unit_id=args.unit,
                arm=args.arm,
            )
            out = render_kde_contour(job)
        else:
            out = render_metric_table(args.reports, args.out)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
