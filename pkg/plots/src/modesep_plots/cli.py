"""modesep-plots <kind> <csv...> -o out.{png,svg}"""

from __future__ import annotations

import argparse
import sys

from .reader import SchemaError
from .render import plot_ellipses, plot_null_overlay, plot_planted, plot_rho, plot_sweeps


def build_parser():
    p = argparse.ArgumentParser(prog="modesep-plots",
                                description="Render figures from modesep experiment CSVs")
    sub = p.add_subparsers(dest="kind", required=True)

    sp = sub.add_parser("null-overlay", help="histogram + analytic density + edge markers")
    sp.add_argument("hist_csv")
    sp.add_argument("curve_csv")
    sp.add_argument("edges_csv")
    sp.add_argument("--log-y", action="store_true", help="log density axis (sharp peaks)")

    sp = sub.add_parser("sweeps", help="SSA vs MI dual-axis sweep curve")
    sp.add_argument("sweep_csv")

    sp = sub.add_parser("planted", help="spike count (and alignment) vs lag")
    sp.add_argument("count_csv")
    sp.add_argument("alignment_csv", nargs="?", default=None)

    sp = sub.add_parser("ellipses", help="scatter panels with leading-direction arrows")
    sp.add_argument("samples_csv")
    sp.add_argument("arrows_csv")

    sp = sub.add_parser("rho", help="trace-autocorrelation decay curve")
    sp.add_argument("rho_csv")
    sp.add_argument("--log-y", action="store_true")

    for name, s in sub.choices.items():
        s.add_argument("-o", "--out", required=True, help="output image (.png or .svg)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.kind == "null-overlay":
            out = plot_null_overlay(args.hist_csv, args.curve_csv, args.edges_csv,
                                    args.out, log_y=args.log_y)
        elif args.kind == "sweeps":
            out = plot_sweeps(args.sweep_csv, args.out)
        elif args.kind == "planted":
            out = plot_planted(args.count_csv, args.out, alignment_csv=args.alignment_csv)
        elif args.kind == "ellipses":
            out = plot_ellipses(args.samples_csv, args.arrows_csv, args.out)
        else:
            out = plot_rho(args.rho_csv, args.out, log_y=args.log_y)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
