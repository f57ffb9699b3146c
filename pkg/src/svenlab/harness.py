"""Training harness: run configuration, the training loop with singular-value
spectrum recording, hyperparameter grid scans, metrics persistence, and the
command-line interface.

Determinism contract: (model seed, data seed, optimizer seed, config) fully
determine every emitted byte except the wall-clock column, which depends on
the injected clock (pass a fake clock to make it reproducible too).
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from svenlab import data as datamod
from svenlab import linalg, loss, net, optim

DATASETS = ("sine1d", "poly6", "mnist")
OPTIMIZERS = ("sven", "sgd", "polyak_sgd", "rmsprop", "adam", "lbfgs", "natgrad")

_DATASET_DEFAULTS = {
    # d_in, d_out, hidden width, batch size, loss kind
    "sine1d": (1, 1, 16, 32, "l2_regression_signed"),
    "poly6": (6, 1, 16, 32, "l2_regression_signed"),
    "mnist": (784, 10, 32, 64, "label_regression"),
}


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class RunConfig:
    dataset: str = "sine1d"
    optimizer: str = "sven"
    loss_kind: str | None = None
    kappa: float = 2.0
    eta: float = 0.1
    k: int = 16
    rtol: float = 1e-3
    micro_batch_size: int = 1
    param_fraction: float = 1.0
    lbfgs_max_iter: int = 10
    lbfgs_history_size: int = 10
    epochs: int = 20
    batch_size: int | None = None
    hidden_widths: tuple[int, ...] | None = None
    n_samples: int = 10_000
    seed_model: int = 0
    seed_data: int = 0
    seed_opt: int = 0
    standardize_targets: bool = False
    mnist_dir: str | None = None

    def resolved(self) -> "ResolvedConfig":
        if self.dataset not in DATASETS:
            raise ConfigError(f"unknown dataset {self.dataset!r}, expect one of {DATASETS}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}, expect one of {OPTIMIZERS}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.n_samples < 1:
            raise ConfigError(f"n_samples must be >= 1, got {self.n_samples}")
        d_in, d_out, width, batch_default, loss_default = _DATASET_DEFAULTS[self.dataset]
        loss_kind = self.loss_kind or loss_default
        if loss_kind == "cross_entropy" and self.dataset != "mnist":
            raise ConfigError("cross_entropy requires the mnist dataset")
        widths = self.hidden_widths or (width, width, width)
        layer_dims = (d_in, *widths, d_out)
        batch_size = self.batch_size or batch_default
        if batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
        n_par = net.n_params(layer_dims)
        if self.optimizer == "natgrad":
            n_train = self.n_samples
            remainder = n_train % batch_size
            if batch_size < n_par or (remainder and remainder < n_par):
                raise ConfigError(
                    f"natgrad needs every batch to carry at least n_params={n_par} "
                    f"conditions (batch_size={batch_size}); the metric would be "
                    "singular, use the sven optimizer instead"
                )
        # Validates the Sven hyperparameters eagerly.
        optim.SvenConfig(
            eta=self.eta,
            k=self.k,
            rtol=self.rtol,
            kappa=self.kappa,
            micro_batch_size=self.micro_batch_size,
            param_fraction=self.param_fraction,
            seed=self.seed_opt,
        )
        lspec = loss.LossSpec(kind=loss_kind, kappa=self.kappa)
        if lspec.signed and self.micro_batch_size != 1 and self.optimizer == "sven":
            raise ConfigError(
                "micro_batch_size > 1 needs a power-kind loss "
                "(label_regression or cross_entropy)"
            )
        return ResolvedConfig(
            run=self,
            loss_kind=loss_kind,
            layer_dims=layer_dims,
            batch_size=batch_size,
            n_params=n_par,
        )


@dataclass(frozen=True)
class ResolvedConfig:
    run: RunConfig
    loss_kind: str
    layer_dims: tuple[int, ...]
    batch_size: int
    n_params: int

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self.run)
        out["loss_kind"] = self.loss_kind
        out["layer_dims"] = list(self.layer_dims)
        out["hidden_widths"] = list(self.layer_dims[1:-1])
        out["batch_size"] = self.batch_size
        out["n_params"] = self.n_params
        return out


@dataclass
class RunRecord:
    """Per-epoch metrics, retained-spectrum statistics, and divergence state."""

    config: dict
    initial_train_loss: float
    initial_val_loss: float
    epoch_rows: list = field(default_factory=list)  # (epoch, train, val, cum_wall_s)
    spectrum_rows: list = field(default_factory=list)  # (epoch, sv_index, mean_ratio, count)
    diverged: bool = False
    diverged_epoch: int | None = None

    @property
    def final_val_loss(self) -> float | None:
        return self.epoch_rows[-1][2] if self.epoch_rows else None

    @property
    def val_losses(self) -> list:
        return [row[2] for row in self.epoch_rows]


class SpectrumRecorder:
    """Per-epoch averages of the normalized retained singular values.

    For each singular index j, the mean of s_j / s_0 is taken over the steps
    in which index j survived truncation, alongside that retention count.
    """

    def __init__(self):
        self.sums = {}
        self.counts = {}

    def record(self, singular_values: np.ndarray):
        if singular_values.shape[0] == 0:
            return
        ratios = singular_values / singular_values[0]
        for j, ratio in enumerate(ratios):
            self.sums[j] = self.sums.get(j, 0.0) + float(ratio)
            self.counts[j] = self.counts.get(j, 0) + 1

    def epoch_rows(self, epoch: int) -> list:
        rows = [
            (epoch, j, self.sums[j] / self.counts[j], self.counts[j])
            for j in sorted(self.counts)
        ]
        self.sums.clear()
        self.counts.clear()
        return rows


def _build_dataset(rcfg: ResolvedConfig) -> datamod.Dataset:
    run = rcfg.run
    if run.dataset == "sine1d":
        return datamod.gen_sine1d(run.n_samples, run.seed_data, run.standardize_targets)
    if run.dataset == "poly6":
        return datamod.gen_poly6(run.n_samples, run.seed_data, run.standardize_targets)
    if run.mnist_dir is None:
        raise ConfigError("mnist runs need --mnist-dir pointing at the IDX files")
    return datamod.load_mnist(run.mnist_dir)


def _targets_for(lspec: loss.LossSpec, ds: datamod.Dataset, split: str):
    if lspec.kind == "cross_entropy":
        labels = ds.train_labels if split == "train" else ds.val_labels
        if labels is None:
            raise ConfigError("cross_entropy needs integer labels in the dataset")
        return labels
    return ds.train_y if split == "train" else ds.val_y


def _step_seed(seed_opt: int, step: int) -> int:
    return int(np.random.SeedSequence([seed_opt, step]).generate_state(1, np.uint64)[0])


def train_run(cfg: RunConfig, clock=time.perf_counter) -> RunRecord:
    """Train one configuration and return its record.

    Evaluation of the full train/validation mean loss happens before any
    update (the epoch-0 losses) and again at the end of every epoch. A
    non-finite loss terminates the run and flags the record as diverged.
    """
    rcfg = cfg.resolved()
    ds = _build_dataset(rcfg)
    lspec = loss.LossSpec(kind=rcfg.loss_kind, kappa=cfg.kappa)
    model = net.init_mlp(rcfg.layer_dims, cfg.seed_model)
    train_y = _targets_for(lspec, ds, "train")
    val_y = _targets_for(lspec, ds, "val")
    plan = datamod.BatchPlan(batch_size=rcfg.batch_size, seed=cfg.seed_data)

    def eval_split(x, y) -> float:
        return loss.batch_mean_loss(lspec, model, x, y)

    record = RunRecord(
        config=rcfg.as_dict(),
        initial_train_loss=eval_split(ds.train_x, train_y),
        initial_val_loss=eval_split(ds.val_x, val_y),
    )

    scfg = optim.SvenConfig(
        eta=cfg.eta,
        k=cfg.k,
        rtol=cfg.rtol,
        kappa=cfg.kappa,
        micro_batch_size=cfg.micro_batch_size,
        param_fraction=cfg.param_fraction,
        seed=cfg.seed_opt,
    )
    state = optim.fresh_state(cfg.optimizer, rcfg.n_params)
    lbfgs_state = optim.LbfgsState(theta=model.theta, history_size=cfg.lbfgs_history_size)
    mask_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([cfg.seed_opt, 0x6D61736B]))
    )
    recorder = SpectrumRecorder()
    cum_wall = 0.0
    step_index = 0

    for epoch in range(1, cfg.epochs + 1):
        try:
            for idx in datamod.batches(ds.n_train, plan, epoch):
                xb = ds.train_x[idx]
                yb = train_y[idx]
                t0 = clock()
                if cfg.optimizer == "sven":
                    mask = None
                    if cfg.param_fraction < 1.0:
                        mask = optim.sample_param_mask(
                            rcfg.n_params, cfg.param_fraction, mask_rng
                        )
                    rb = loss.residual_jacobian(
                        lspec, model, xb, yb, cfg.micro_batch_size, mask
                    )
                    model.theta, info = optim.sven_step(
                        rb.residuals,
                        rb.jacobian,
                        scfg,
                        model.theta,
                        param_mask=mask,
                        step_seed=_step_seed(cfg.seed_opt, step_index),
                    )
                    recorder.record(info.singular_values)
                elif cfg.optimizer == "natgrad":
                    rb = loss.residual_jacobian(lspec, model, xb, yb)
                    model.theta = optim.natgrad_step(
                        rb.residuals, rb.jacobian, cfg.eta, model.theta
                    )
                elif cfg.optimizer == "lbfgs":
                    def loss_fn(theta):
                        return loss.batch_mean_loss(
                            lspec, net.MlpModel(model.layer_dims, theta), xb, yb
                        )

                    def grad_fn(theta):
                        return loss.batch_mean_loss_and_grad(
                            lspec, net.MlpModel(model.layer_dims, theta), xb, yb
                        )[1]

                    lbfgs_state.theta = model.theta
                    model.theta = optim.lbfgs_step(
                        loss_fn,
                        grad_fn,
                        lbfgs_state,
                        cfg.eta,
                        cfg.lbfgs_max_iter,
                        cfg.lbfgs_history_size,
                    )
                else:
                    batch_loss, g = loss.batch_mean_loss_and_grad(lspec, model, xb, yb)
                    if cfg.optimizer == "sgd":
                        model.theta = optim.sgd_step(model.theta, g, cfg.eta)
                    elif cfg.optimizer == "polyak_sgd":
                        model.theta = optim.polyak_sgd_step(model.theta, g, batch_loss)
                    elif cfg.optimizer == "rmsprop":
                        model.theta = optim.rmsprop_step(model.theta, g, state, cfg.eta)
                    elif cfg.optimizer == "adam":
                        model.theta = optim.adam_step(model.theta, g, state, cfg.eta)
                if not np.isfinite(model.theta).all():
                    raise optim.OptimError("non-finite parameters")
                cum_wall += clock() - t0
                step_index += 1
            train_loss = eval_split(ds.train_x, train_y)
            val_loss = eval_split(ds.val_x, val_y)
            if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
                raise optim.OptimError("non-finite epoch loss")
        except (optim.OptimError, linalg.LinalgError, loss.LossError, FloatingPointError):
            record.diverged = True
            record.diverged_epoch = epoch
            break
        record.epoch_rows.append((epoch, train_loss, val_loss, cum_wall))
        if cfg.optimizer == "sven":
            record.spectrum_rows.extend(recorder.epoch_rows(epoch))
    return record


def _fmt(x: float) -> str:
    # Shortest decimal that round-trips to the same float64.
    return repr(float(x))


def emit_metrics(record: RunRecord, out_dir) -> list[Path]:
    """Write metrics.csv, spectra.csv, and run.json into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics = out / "metrics.csv"
    with open(metrics, "w", newline="\n") as f:
        f.write("epoch,train_loss,val_loss,cum_wall_s\n")
        for epoch, train_loss, val_loss, wall in record.epoch_rows:
            f.write(f"{epoch},{_fmt(train_loss)},{_fmt(val_loss)},{_fmt(wall)}\n")
    spectra = out / "spectra.csv"
    with open(spectra, "w", newline="\n") as f:
        f.write("epoch,sv_index,mean_ratio,retained_count\n")
        for epoch, j, ratio, count in record.spectrum_rows:
            f.write(f"{epoch},{j},{_fmt(ratio)},{count}\n")
    run_json = out / "run.json"
    payload = {
        "config": record.config,
        "initial_train_loss": record.initial_train_loss,
        "initial_val_loss": record.initial_val_loss,
        "final_val_loss": record.final_val_loss,
        "diverged": record.diverged,
        "diverged_epoch": record.diverged_epoch,
        "epochs_completed": len(record.epoch_rows),
    }
    with open(run_json, "w", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return [metrics, spectra, run_json]


@dataclass
class ScanResult:
    best_config: RunConfig | None
    best_index: int | None
    records: list
    point_dirs: list


def grid_scan(base_cfg: RunConfig, grid: dict, out_dir=None, clock=time.perf_counter) -> ScanResult:
    """Run the Cartesian product of grid axes over RunConfig fields.

    Every point shares the base model/data seeds. The best point minimizes the
    final validation loss; diverged runs are kept as records but never win.
    """
    if not grid:
        raise ConfigError("grid must have at least one axis")
    for key in grid:
        if key not in {f.name for f in dataclasses.fields(RunConfig)}:
            raise ConfigError(f"unknown grid axis {key!r}")
    keys = sorted(grid)
    records = []
    point_dirs = []
    configs = []
    for i, values in enumerate(itertools.product(*(grid[k] for k in keys))):
        point = dict(zip(keys, values))
        cfg = dataclasses.replace(base_cfg, **point)
        record = train_run(cfg, clock=clock)
        records.append(record)
        configs.append(cfg)
        if out_dir is not None:
            pdir = Path(out_dir) / f"point_{i:03d}"
            emit_metrics(record, pdir)
            point_dirs.append(pdir)
    best_index = None
    for i, record in enumerate(records):
        if record.diverged or record.final_val_loss is None:
            continue
        if best_index is None or record.final_val_loss < records[best_index].final_val_loss:
            best_index = i
    if out_dir is not None:
        summary = {
            "axes": {k: list(map(_json_safe, grid[k])) for k in keys},
            "best_index": best_index,
            "points": [
                {
                    "dir": f"point_{i:03d}",
                    "params": {k: _json_safe(v) for k, v in zip(keys, vals)},
                    "final_val_loss": rec.final_val_loss,
                    "diverged": rec.diverged,
                }
                for i, (vals, rec) in enumerate(
                    zip(itertools.product(*(grid[k] for k in keys)), records)
                )
            ],
        }
        with open(Path(out_dir) / "scan_summary.json", "w", newline="\n") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
            f.write("\n")
    best_cfg = configs[best_index] if best_index is not None else None
    return ScanResult(
        best_config=best_cfg, best_index=best_index, records=records, point_dirs=point_dirs
    )


def _json_safe(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _widths_arg(text: str) -> tuple[int, ...]:
    try:
        widths = tuple(int(tok) for tok in text.split(",") if tok)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad widths {text!r}") from exc
    if not widths:
        raise argparse.ArgumentTypeError("widths must be non-empty")
    return widths


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--dataset", choices=DATASETS, default="sine1d")
    p.add_argument("--optimizer", choices=OPTIMIZERS, default="sven")
    p.add_argument("--loss", dest="loss_kind", choices=loss.LOSS_KINDS, default=None)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--rtol", type=float, default=1e-3)
    p.add_argument("--kappa", type=float, default=2.0)
    p.add_argument("--micro-batch", dest="micro_batch_size", type=int, default=1)
    p.add_argument("--param-fraction", dest="param_fraction", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--widths", dest="hidden_widths", type=_widths_arg, default=None)
    p.add_argument("--n-samples", dest="n_samples", type=int, default=10_000)
    p.add_argument("--seed-model", dest="seed_model", type=int, default=0)
    p.add_argument("--seed-data", dest="seed_data", type=int, default=0)
    p.add_argument("--seed-opt", dest="seed_opt", type=int, default=0)
    p.add_argument("--lbfgs-max-iter", dest="lbfgs_max_iter", type=int, default=10)
    p.add_argument("--lbfgs-history", dest="lbfgs_history_size", type=int, default=10)
    p.add_argument("--standardize-targets", action="store_true")
    p.add_argument("--mnist-dir", dest="mnist_dir", default=None)
    p.add_argument("--out", default=None)


def _config_from_args(args) -> RunConfig:
    names = {f.name for f in dataclasses.fields(RunConfig)}
    return RunConfig(**{k: v for k, v in vars(args).items() if k in names})


def _cmd_train(args) -> int:
    cfg = _config_from_args(args)
    record = train_run(cfg)
    out = args.out or f"runs/{cfg.dataset}_{cfg.optimizer}"
    emit_metrics(record, out)
    status = f"diverged at epoch {record.diverged_epoch}" if record.diverged else "ok"
    print(
        f"{cfg.dataset}/{cfg.optimizer}: {status}, "
        f"final val loss {record.final_val_loss}, wrote {out}"
    )
    return 0


def _cmd_scan(args) -> int:
    grid_path = Path(args.grid)
    try:
        grid = json.loads(grid_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read grid file {grid_path}: {exc}") from exc
    if not isinstance(grid, dict) or not all(isinstance(v, list) for v in grid.values()):
        raise ConfigError("grid file must map RunConfig field names to value arrays")
    if "hidden_widths" in grid:
        grid["hidden_widths"] = [tuple(w) for w in grid["hidden_widths"]]
    cfg = _config_from_args(args)
    out = args.out or f"scans/{cfg.dataset}_{cfg.optimizer}"
    result = grid_scan(cfg, grid, out_dir=out)
    n_div = sum(r.diverged for r in result.records)
    best = (
        "no convergent point"
        if result.best_index is None
        else f"best point_{result.best_index:03d} "
        f"(val {result.records[result.best_index].final_val_loss})"
    )
    print(f"scan over {len(result.records)} points, {n_div} diverged, {best}, wrote {out}")
    return 0


def _cmd_data_gen(args) -> int:
    if args.dataset == "sine1d":
        ds = datamod.gen_sine1d(args.n, args.seed, args.standardize_targets)
    else:
        ds = datamod.gen_poly6(args.n, args.seed, args.standardize_targets)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for stem, m in (
        ("train_x", ds.train_x),
        ("train_y", ds.train_y),
        ("val_x", ds.val_x),
        ("val_y", ds.val_y),
    ):
        datamod.save_matrix(out / f"{stem}.svnm", m)
    meta = {
        "dataset": ds.name,
        "n": args.n,
        "seed": args.seed,
        "mean": ds.mean.tolist(),
        "std": ds.std.tolist(),
    }
    with open(out / "meta.json", "w", newline="\n") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {ds.name} (n={args.n} per split) to {out}")
    return 0


def _cmd_data_fetch(args) -> int:
    dest = datamod.fetch_mnist(args.dest, args.base_url)
    print(f"MNIST IDX files in {dest}")
    return 0


def _selftest_checks():
    rng = np.random.Generator(np.random.PCG64(20240601))

    def penrose():
        m = rng.standard_normal((12, 20))
        p = linalg.pinv_matrix(linalg.dense_svd(m))
        assert np.linalg.norm(m @ p @ m - m) <= 1e-8
        assert np.linalg.norm(p @ m @ p - p) <= 1e-8
        assert np.linalg.norm((m @ p).T - m @ p) <= 1e-8
        assert np.linalg.norm((p @ m).T - p @ m) <= 1e-8

    def rsvd_exact_rank():
        m = rng.standard_normal((24, 4)) @ rng.standard_normal((4, 80))
        f = linalg.randomized_truncated_svd(m, 4, 0.0, seed=7)
        s_ref = linalg.dense_svd(m).s[:4]
        assert np.allclose(f.s, s_ref, rtol=1e-8, atol=0)

    def gelu_derivative():
        xs = np.linspace(-4, 4, 33)
        h = 1e-6
        fd = (net.gelu(xs + h) - net.gelu(xs - h)) / (2 * h)
        assert np.max(np.abs(net.gelu_prime(xs) - fd)) <= 1e-8

    def jacobian_fd():
        model = net.init_mlp((2, 5, 5, 5, 1), seed=3)
        lspec = loss.LossSpec("l2_regression_signed")
        x = rng.standard_normal((3, 2))
        y = rng.standard_normal((3, 1))
        rb = loss.residual_jacobian(lspec, model, x, y)
        h = 1e-4
        for i in range(0, model.theta.shape[0], 97):
            tp, tm = model.theta.copy(), model.theta.copy()
            tp[i] += h
            tm[i] -= h
            fp = loss.residual_jacobian(lspec, net.MlpModel(model.layer_dims, tp), x, y)
            fm = loss.residual_jacobian(lspec, net.MlpModel(model.layer_dims, tm), x, y)
            fd = (fp.residuals - fm.residuals) / (2 * h)
            assert np.max(np.abs(fd - rb.jacobian[:, i]) / (1 + np.abs(rb.jacobian[:, i]))) <= 1e-5

    def natgrad_reduction():
        m = rng.standard_normal((32, 5))
        r = rng.standard_normal(32)
        theta = np.zeros(5)
        cfg = optim.SvenConfig(eta=0.7, k=32, rtol=0.0)
        t_sven, _ = optim.sven_step(r, m, cfg, theta)
        t_nat = optim.natgrad_step(r, m, 0.7, theta)
        assert np.allclose(t_sven, t_nat, rtol=1e-6, atol=1e-12)

    def run_determinism():
        cfg = RunConfig(dataset="sine1d", optimizer="sven", n_samples=64, epochs=2, eta=0.5)
        fake = itertools.count()
        rec1 = train_run(cfg, clock=lambda: next(fake) * 0.0)
        rec2 = train_run(cfg, clock=lambda: 0.0)
        assert rec1.epoch_rows == rec2.epoch_rows
        assert rec1.spectrum_rows == rec2.spectrum_rows

    return [
        ("penrose_conditions", penrose),
        ("randomized_svd_exact_rank", rsvd_exact_rank),
        ("gelu_derivative_fd", gelu_derivative),
        ("residual_jacobian_fd", jacobian_fd),
        ("natgrad_reduction", natgrad_reduction),
        ("run_determinism", run_determinism),
    ]


def _cmd_selftest(_args) -> int:
    failed = 0
    for name, check in _selftest_checks():
        try:
            check()
        except AssertionError:
            failed += 1
            print(f"selftest {name}: FAIL")
        else:
            print(f"selftest {name}: ok")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svenlab",
        description="Truncated-SVD pseudoinverse optimizer benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one configuration")
    _add_train_flags(p_train)
    p_train.set_defaults(func=_cmd_train)

    p_scan = sub.add_parser("scan", help="run a hyperparameter grid")
    _add_train_flags(p_scan)
    p_scan.add_argument("--grid", required=True, help="JSON file mapping fields to value arrays")
    p_scan.set_defaults(func=_cmd_scan)

    p_data = sub.add_parser("data", help="dataset utilities")
    data_sub = p_data.add_subparsers(dest="data_command", required=True)
    p_gen = data_sub.add_parser("gen", help="generate a synthetic dataset to disk")
    p_gen.add_argument("--dataset", choices=("sine1d", "poly6"), required=True)
    p_gen.add_argument("--n", type=int, default=10_000)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--standardize-targets", action="store_true")
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_data_gen)
    p_fetch = data_sub.add_parser("fetch", help="download MNIST (network access)")
    p_fetch.add_argument("--dest", required=True)
    p_fetch.add_argument("--base-url", dest="base_url", default=datamod.MNIST_BASE_URL)
    p_fetch.set_defaults(func=_cmd_data_fetch)

    p_self = sub.add_parser("selftest", help="run the built-in invariant checks")
    p_self.set_defaults(func=_cmd_selftest)
    return parser


def cli(argv) -> int:
    """Entry point used by tests; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (ConfigError, loss.LossError, optim.OptimError, datamod.DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
