"""Command line front end for figure regeneration."""

from __future__ import annotations

import argparse
import os
import sys

from .render import KINDS, FigureSpec, SchemaError, render

# short name for the most commonly regenerated spectrum plot
_ALIASES = {"spectrum": "spectrum_ds"}


def _classical(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"not a comma-separated list of numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trimer-figures",
        description="Regenerate figures from simulation CSV artifacts.")
    parser.add_argument("--in", dest="in_dir", required=True, metavar="DIR",
                        help="directory holding the simulation CSV artifacts")
    parser.add_argument("--kind", required=True,
                        choices=sorted(KINDS) + sorted(_ALIASES),
                        help="which figure to regenerate")
    parser.add_argument("--out", dest="out_path", required=True,
                        metavar="PATH",
                        help="output image path (format from the extension)")
    parser.add_argument("--classical", type=_classical, default=(),
                        metavar="V1,V2",
                        help="steady-state population values to overlay as "
                             "dotted lines on population plots")
    parser.add_argument("--dpi", type=int, default=100)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    # pin the embedded-metadata clock for output formats that record one
    os.environ.setdefault("SOURCE_DATE_EPOCH", "315532800")
    spec = FigureSpec(in_dir=args.in_dir,
                      kind=_ALIASES.get(args.kind, args.kind),
                      out_path=args.out_path,
                      classical=args.classical,
                      dpi=args.dpi)
    try:
        render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def entry() -> None:
    sys.exit(main())
