"""Panel construction from svenlab run directories.

Every run directory is expected to contain metrics.csv (epoch, train_loss,
val_loss, cum_wall_s), spectra.csv (epoch, sv_index, mean_ratio,
retained_count), and run.json. Rendering is read-only over those files, and
the plotted data arrays are a pure function of their contents.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 - backend must be pinned first
import numpy as np  # noqa: E402

PANELS = (
    "loss_vs_epoch",
    "loss_vs_walltime",
    "k_sweep",
    "rtol_sweep",
    "spectrum_overlay",
    "band_plot",
)


class FigureError(ValueError):
    """Missing or malformed run inputs, or an invalid panel request."""


@dataclass
class FigureSpec:
    run_dirs: list
    panel: str
    out_path: str
    log_x: bool = False
    log_y: bool = True

    def __post_init__(self):
        if self.panel not in PANELS:
            raise FigureError(f"unknown panel {self.panel!r}, expect one of {PANELS}")
        if not self.run_dirs:
            raise FigureError("at least one run directory is required")


def _read_csv(path: Path, columns) -> dict:
    if not path.exists():
        raise FigureError(f"missing {path.name} in run directory {path.parent}")
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise FigureError(f"{path}: empty file") from None
        if header != list(columns):
            raise FigureError(f"{path}: unexpected header {header}, wanted {list(columns)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(columns):
                raise FigureError(f"{path}: line {lineno} has {len(row)} fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise FigureError(f"{path}: line {lineno}: {exc}") from None
    data = np.array(rows, dtype=np.float64) if rows else np.empty((0, len(columns)))
    return {name: data[:, i] for i, name in enumerate(columns)}


def load_metrics(run_dir) -> dict:
    return _read_csv(
        Path(run_dir) / "metrics.csv", ("epoch", "train_loss", "val_loss", "cum_wall_s")
    )


def load_spectra(run_dir) -> dict:
    return _read_csv(
        Path(run_dir) / "spectra.csv", ("epoch", "sv_index", "mean_ratio", "retained_count")
    )


def load_run_config(run_dir) -> dict:
    path = Path(run_dir) / "run.json"
    if not path.exists():
        raise FigureError(f"missing run.json in run directory {run_dir}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FigureError(f"{path}: not valid JSON: {exc}") from None


def _run_label(run_dir, key=None) -> str:
    cfg = load_run_config(run_dir).get("config", {})
    if key is not None:
        return f"{key}={cfg.get(key)}"
    return str(cfg.get("optimizer", Path(run_dir).name))


def panel_data(spec: FigureSpec) -> dict:
    """The arrays a panel will plot, keyed by series label.

    Identical CSV inputs produce identical arrays; rendering adds nothing but
    styling on top of this.
    """
    if spec.panel == "band_plot":
        if len(spec.run_dirs) < 2:
            raise FigureError(
                f"band_plot needs at least 2 runs to form a band, got {len(spec.run_dirs)}"
            )
        curves = []
        epochs = None
        for d in spec.run_dirs:
            m = load_metrics(d)
            if epochs is not None and not np.array_equal(m["epoch"], epochs):
                raise FigureError(f"run {d} has a different epoch grid than the first run")
            epochs = m["epoch"]
            curves.append(m["val_loss"])
        stack = np.vstack(curves)
        return {
            "epoch": epochs,
            "mean": stack.mean(axis=0),
            "std": stack.std(axis=0),
            "n_runs": np.array([len(curves)]),
        }

    if spec.panel == "spectrum_overlay":
        out = {}
        for d in spec.run_dirs:
            s = load_spectra(d)
            if s["epoch"].size == 0:
                raise FigureError(f"no spectra recorded in {d} (only sven runs emit spectra)")
            for epoch in np.unique(s["epoch"]):
                sel = s["epoch"] == epoch
                label = f"{Path(d).name} epoch {int(epoch)}"
                out[label] = np.vstack([s["sv_index"][sel], s["mean_ratio"][sel]])
        return out

    key = {"k_sweep": "k", "rtol_sweep": "rtol"}.get(spec.panel)
    out = {}
    for d in spec.run_dirs:
        m = load_metrics(d)
        x = m["cum_wall_s"] if spec.panel == "loss_vs_walltime" else m["epoch"]
        label = _run_label(d, key)
        out[label] = np.vstack([x, m["val_loss"]])
        if spec.panel == "loss_vs_epoch" and len(spec.run_dirs) == 1:
            out["train"] = np.vstack([m["epoch"], m["train_loss"]])
    return out


def _draw_panel(ax, spec: FigureSpec, data: dict):
    if spec.panel == "band_plot":
        ax.plot(data["epoch"], data["mean"], label=f"mean of {int(data['n_runs'][0])} runs")
        ax.fill_between(
            data["epoch"],
            data["mean"] - data["std"],
            data["mean"] + data["std"],
            alpha=0.3,
            label="±1σ",
        )
        ax.set_xlabel("epoch")
        ax.set_ylabel("validation loss")
    elif spec.panel == "spectrum_overlay":
        for label, arr in data.items():
            ax.plot(arr[0], arr[1], marker=".", linewidth=0.8, label=label)
        ax.set_xlabel("singular value index")
        ax.set_ylabel("mean retained ratio σ_j / σ_1")
    else:
        for label, arr in data.items():
            ax.plot(arr[0], arr[1], label=label)
        ax.set_xlabel("wall time [s]" if spec.panel == "loss_vs_walltime" else "epoch")
        ax.set_ylabel("loss")
    if spec.log_y:
        ax.set_yscale("log")
    if spec.log_x:
        ax.set_xscale("log")
    if len(data) <= 12:
        ax.legend(fontsize=7)


def render(spec: FigureSpec) -> Path:
    """Render one panel to spec.out_path and return the written path."""
    data = panel_data(spec)
    fig, ax = plt.subplots(figsize=(5.0, 3.6), dpi=120)
    try:
        _draw_panel(ax, spec, data)
        ax.set_title(spec.panel)
        fig.tight_layout()
        out = Path(spec.out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out)
    finally:
        plt.close(fig)
    return out
