"""plot_fig1: render a sweep CSV to an image file."""

from __future__ import annotations

import argparse
import sys

from .render import PlotError, PlotSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot_fig1", description="Render an SNR-sweep CSV as a variance/bound chart."
    )
    parser.add_argument("csv", help="input CSV produced by the sweep tool")
    parser.add_argument("-o", "--out", required=True, help="output image path (format by extension)")
    parser.add_argument("--ymax", type=float, default=3.0, help="upper y-axis limit (default 3)")
    args = parser.parse_args(argv)
    try:
        render(PlotSpec(csv_path=args.csv, out_path=args.out, ymax=args.ymax))
    except PlotError as exc:
        print(f"plot_fig1: error: {exc}", file=sys.stderr)
        return 1
    return 0


def run() -> None:
    sys.exit(main())
