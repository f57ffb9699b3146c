#!/usr/bin/env python3
"""Train sven on each synthetic task and report how the retained singular
value spectrum differs between them (the hierarchy that controls k / rtol
sensitivity).

    python scripts/run_spectrum_diagnostics.py --n-samples 1024 --out runs/spectra
    svenfigs-render runs/spectra/sine1d --panel spectrum_overlay --out sine_spec.png
"""

import argparse
from pathlib import Path

from svenlab.harness import RunConfig, emit_metrics, train_run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-samples", type=int, default=10_000)
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--out", default="runs/spectra")
    args = ap.parse_args()

    for dataset, standardize in (("sine1d", False), ("poly6", True)):
        cfg = RunConfig(
            dataset=dataset,
            optimizer="sven",
            eta=0.1,
            k=32,
            rtol=1e-4,
            n_samples=args.n_samples,
            epochs=args.epochs,
            standardize_targets=standardize,
        )
        rec = train_run(cfg)
        out = Path(args.out) / dataset
        emit_metrics(rec, out)
        last_epoch = max(row[0] for row in rec.spectrum_rows)
        retained = [row for row in rec.spectrum_rows if row[0] == last_epoch]
        print(
            f"{dataset}: final val {rec.final_val_loss:.3e}, "
            f"{len(retained)} singular indices retained in epoch {last_epoch}, "
            f"smallest mean ratio {min(r[2] for r in retained):.2e} -> {out}"
        )


if __name__ == "__main__":
    main()
