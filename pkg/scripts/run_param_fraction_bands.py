#!/usr/bin/env python3
"""Parameter-batching bands: train sven on poly6 at several parameter
fractions, ten model seeds each, and emit run directories suitable for
svenfigs band plots.

    python scripts/run_param_fraction_bands.py --n-samples 1024 --out runs/bands
    svenfigs-render runs/bands/f1.0/seed* --panel band_plot --out bands_full.png
"""

import argparse
from pathlib import Path

from svenlab.harness import RunConfig, emit_metrics, train_run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-samples", type=int, default=10_000)
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--fractions", type=float, nargs="+", default=[0.1, 0.25, 0.5, 1.0])
    ap.add_argument("--n-seeds", type=int, default=10)
    ap.add_argument("--out", default="runs/param_fraction_bands")
    args = ap.parse_args()

    for fraction in args.fractions:
        finals = []
        for seed in range(args.n_seeds):
            cfg = RunConfig(
                dataset="poly6",
                optimizer="sven",
                eta=0.1,
                k=32,
                rtol=1e-2,
                param_fraction=fraction,
                n_samples=args.n_samples,
                epochs=args.epochs,
                seed_model=seed,
                standardize_targets=True,
            )
            rec = train_run(cfg)
            emit_metrics(rec, Path(args.out) / f"f{fraction}" / f"seed{seed}")
            finals.append(rec.final_val_loss)
        mean = sum(finals) / len(finals)
        print(f"fraction {fraction}: mean final val loss {mean:.4e}")


if __name__ == "__main__":
    main()
