"""Render one panel from svenlab run directories.

Usage:
    svenfigs-render --panel loss_vs_epoch --out fig.png RUN_DIR [RUN_DIR ...]
"""

from __future__ import annotations

import argparse
import sys

from svenfigs.figlib import PANELS, FigureError, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="svenfigs-render", description=__doc__)
    p.add_argument("run_dirs", nargs="+", help="run directories with metrics.csv etc.")
    p.add_argument("--panel", choices=PANELS, required=True)
    p.add_argument("--out", required=True, help="output image path (.png or .svg)")
    p.add_argument("--log-x", action="store_true")
    p.add_argument("--linear-y", action="store_true", help="disable the default log-y axis")
    return p


def cli(argv) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    spec = FigureSpec(
        run_dirs=args.run_dirs,
        panel=args.panel,
        out_path=args.out,
        log_x=args.log_x,
        log_y=not args.linear_y,
    )
    try:
        out = render(spec)
    except FigureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


def main():
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
