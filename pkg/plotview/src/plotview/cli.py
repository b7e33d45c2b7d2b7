"""Command line front end: `plotview render --kind ... --in ... --out ...`.

Exit codes: 0 on success, 1 when the input does not match the documented
schema (the message names the offending column) or has no data, 2 for
runtime failures such as an unwritable output path.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .render import FigureSpec, KINDS, render
from .schemas import NoDataError, SchemaError


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="plotview",
        description="Render fmesim result CSVs to static images.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one CSV to one image")
    p.add_argument("--kind", required=True, choices=KINDS,
                   help="figure kind: throughput bars or d2d curves")
    p.add_argument("--in", dest="in_path", required=True,
                   help="input CSV (documented fmesim schema)")
    p.add_argument("--out", dest="out_path", required=True,
                   help="output image path (.png or .svg)")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        report = render(FigureSpec(kind=args.kind, in_path=args.in_path,
                                   out_path=args.out_path))
    except (SchemaError, NoDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:            # noqa: BLE001 - CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2
    detail = (f"{report.bars} bars" if report.kind == "throughput"
              else f"{report.series} series x {report.panels} panels")
    print(f"wrote {report.out_path} ({detail})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
