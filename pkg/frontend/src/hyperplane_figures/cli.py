"""Command-line wrapper: hyperplane-figures --input ... --kind ... --output ..."""

from __future__ import annotations

import argparse
import sys

from hyperplane_figures.render import KINDS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperplane-figures",
        description="Render figures from hyperplane CSV outputs",
    )
    parser.add_argument("--input", action="append", required=True,
                        help="input CSV (repeatable for trace overlays)")
    parser.add_argument("--kind", choices=KINDS, required=True)
    parser.add_argument("--output", required=True, help="output image path")
    parser.add_argument("--horizon", type=float, default=4.0,
                        help="radius the rescaled histogram terminals were taken at")
    parser.add_argument("--title", default=None)
    parser.add_argument("--dpi", type=int, default=150)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(inputs=args.input, kind=args.kind, output=args.output,
                      horizon=args.horizon, dpi=args.dpi, title=args.title)
    try:
        out = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
