"""Compose the six-panel summary figure: loss vs epoch (top row) and loss vs
wall time (bottom row), one column per task group.

Usage:
    svenfigs-grid --out main.png \
        --group "1d regression=runs/sine_sven,runs/sine_adam" \
        --group "polynomial=runs/poly_sven,runs/poly_adam" \
        --group "mnist=runs/mnist_sven,runs/mnist_adam"
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from svenfigs.figlib import FigureError, FigureSpec, _draw_panel, panel_data  # noqa: E402


def parse_group(text: str) -> tuple[str, list]:
    name, _, dirs = text.partition("=")
    run_dirs = [d for d in dirs.split(",") if d]
    if not name or not run_dirs:
        raise argparse.ArgumentTypeError(
            f"bad group {text!r}, expected NAME=dir1,dir2[,...]"
        )
    return name, run_dirs


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="svenfigs-grid", description=__doc__)
    p.add_argument(
        "--group",
        action="append",
        required=True,
        type=parse_group,
        metavar="NAME=DIR[,DIR...]",
        help="one task column; repeat for more columns",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--linear-y", action="store_true")
    return p


def render_grid(groups, out_path, log_y=True) -> Path:
    n_cols = len(groups)
    fig, axes = plt.subplots(2, n_cols, figsize=(4.2 * n_cols, 6.4), dpi=120, squeeze=False)
    for col, (name, run_dirs) in enumerate(groups):
        for row, panel in enumerate(("loss_vs_epoch", "loss_vs_walltime")):
            spec = FigureSpec(run_dirs=run_dirs, panel=panel, out_path=str(out_path), log_y=log_y)
            _draw_panel(axes[row][col], spec, panel_data(spec))
            axes[row][col].set_title(name if row == 0 else "")
    fig.tight_layout()
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    plt.close(fig)
    return out


def cli(argv) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        out = render_grid(args.group, args.out, log_y=not args.linear_y)
    except FigureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


def main():
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
