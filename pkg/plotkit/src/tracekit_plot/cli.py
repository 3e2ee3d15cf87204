"""tracekit-plot: render benchmark CSVs to figures.

Exit codes: 0 on success, 2 on configuration or schema errors.
"""

from __future__ import annotations

import argparse
import sys

from .aggregate import KINDS, SchemaError, summary_table
from .render import PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracekit-plot",
        description="Render benchmark CSVs into failure-count, timing or moment figures",
    )
    parser.add_argument("--csv", required=True, help="input CSV path")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", default=None, help="output image path (png)")
    parser.add_argument(
        "--trials-per-repeat",
        type=int,
        default=100,
        help="trials per repeat used to group trial_index (default 100)",
    )
    parser.add_argument(
        "--summary",
        action="store_true",
        help="print the aggregated table the figure plots",
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    if not args.out and not args.summary:
        print("error: provide --out, --summary or both", file=sys.stderr)
        return 2
    try:
        _, aggregates = render(
            PlotSpec(
                csv_path=args.csv,
                kind=args.kind,
                out_path=args.out,
                trials_per_repeat=args.trials_per_repeat,
            )
        )
    except (SchemaError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.summary:
        print(summary_table(aggregates))
    if args.out:
        print(f"wrote {args.kind} figure to {args.out}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
