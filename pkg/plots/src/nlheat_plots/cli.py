"""plots <kind> --in ... --out ..."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, render
from .tables import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plots",
                                     description="render figures from nlheat CSV artifacts")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind)
        s.add_argument("--in", dest="inputs", nargs="+", required=True,
                       help="input CSV file(s)")
        s.add_argument("--out", dest="output", required=True,
                       help="output image path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = render(FigureSpec(kind=args.kind, inputs=args.inputs,
                                   output=args.output))
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(result.path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
