#!/usr/bin/env python3
"""Reproduce the 1D-regression comparison: full hyperparameter grids for the
sven optimizer and the first-order baselines, best-vs-best per model seed.

At the default scale (10,000 samples per split) this is slow on a laptop;
--n-samples 1024 gives the same qualitative picture in a few minutes.

    python scripts/run_sine_scan.py --n-samples 1024 --out scans/sine1d
"""

import argparse
import json
from pathlib import Path

from svenlab.harness import RunConfig, grid_scan

SVEN_GRID = {"eta": [0.05, 0.1, 0.5, 1.0], "k": [1, 2, 4, 8, 16, 32], "rtol": [1e-4, 1e-3, 1e-2]}
BASELINE_GRID = {"eta": [1e-4, 1e-3, 1e-2, 1e-1]}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-samples", type=int, default=10_000)
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 4])
    ap.add_argument("--out", default="scans/sine1d")
    args = ap.parse_args()

    summary = {}
    for seed in args.seeds:
        base = RunConfig(
            dataset="sine1d", n_samples=args.n_samples, epochs=args.epochs, seed_model=seed
        )
        per_opt = {}
        out_root = Path(args.out) / f"seed{seed}"
        res = grid_scan(base, SVEN_GRID, out_dir=out_root / "sven")
        per_opt["sven"] = res.records[res.best_index].final_val_loss
        for opt in ("sgd", "rmsprop", "adam"):
            res = grid_scan(
                RunConfig(
                    dataset="sine1d",
                    optimizer=opt,
                    n_samples=args.n_samples,
                    epochs=args.epochs,
                    seed_model=seed,
                ),
                BASELINE_GRID,
                out_dir=out_root / opt,
            )
            per_opt[opt] = (
                res.records[res.best_index].final_val_loss if res.best_index is not None else None
            )
        from svenlab.harness import emit_metrics, train_run

        rec = train_run(
            RunConfig(
                dataset="sine1d",
                optimizer="polyak_sgd",
                n_samples=args.n_samples,
                epochs=args.epochs,
                seed_model=seed,
            )
        )
        emit_metrics(rec, out_root / "polyak_sgd")
        per_opt["polyak_sgd"] = rec.final_val_loss
        summary[seed] = per_opt
        print(f"seed {seed}: " + ", ".join(f"{k}={v:.3e}" for k, v in per_opt.items() if v))

    with open(Path(args.out) / "best_by_seed.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    print(f"summary in {args.out}/best_by_seed.json")


if __name__ == "__main__":
    main()
