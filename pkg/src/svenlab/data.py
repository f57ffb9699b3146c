"""Datasets: 1D damped-sine regression, random degree-4 polynomials over R^6,
MNIST in IDX format, input standardization, and seeded batch iteration.

Synthetic generation is a pure function of (n, seed). Inputs are always
standardized with statistics computed on the training split only; targets are
left raw unless standardize_targets is requested.
"""

from __future__ import annotations

import gzip
import itertools
import struct
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049
MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "val_images": "t10k-images-idx3-ubyte",
    "val_labels": "t10k-labels-idx1-ubyte",
}

CONTAINER_MAGIC = b"SVNM"
CONTAINER_VERSION = 1


class DataError(ValueError):
    """Malformed dataset files or invalid generation parameters."""


@dataclass
class Dataset:
    """Train and validation splits plus the training-split standardization stats."""

    name: str
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    train_labels: np.ndarray | None = None
    val_labels: np.ndarray | None = None

    @property
    def d_in(self) -> int:
        return self.train_x.shape[1]

    @property
    def d_out(self) -> int:
        return self.train_y.shape[1]

    @property
    def n_train(self) -> int:
        return self.train_x.shape[0]


def standardize_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and std; zero-variance features get std clamped to 1."""
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    return mean, std


def sine1d_target(x):
    """exp(-10 x^2) * sin(2 x)."""
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-10.0 * x * x) * np.sin(2.0 * x)


def gen_sine1d(n: int, seed: int, standardize_targets: bool = False) -> Dataset:
    """n training and n validation samples of the damped sine, x ~ U[-1, 1]."""
    if n < 1:
        raise DataError(f"n must be >= 1, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    xs = rng.uniform(-1.0, 1.0, size=(2 * n, 1))
    ys = sine1d_target(xs)
    return _assemble("sine1d", xs[:n], ys[:n], xs[n:], ys[n:], standardize_targets)


def poly6_exponents() -> np.ndarray:
    """Exponent tuples of all 210 monomials in 6 variables with total degree <= 4.

    Fixed graded-lexicographic order: ascending total degree, ties broken by
    ascending lexicographic comparison of the exponent tuple.
    """
    exps = [
        d
        for d in itertools.product(range(5), repeat=6)
        if sum(d) <= 4
    ]
    exps.sort(key=lambda d: (sum(d), d))
    return np.array(exps, dtype=np.int64)


def poly6_eval(x: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Evaluate sum_d c_d * prod_i x_i^(d_i) at each row of x."""
    exps = poly6_exponents()
    monomials = np.prod(x[:, None, :] ** exps[None, :, :], axis=2)
    return monomials @ coeffs


def gen_poly6(n: int, seed: int, standardize_targets: bool = False) -> Dataset:
    """A random degree-4 polynomial over R^6 with N(0,1) coefficients and inputs."""
    if n < 1:
        raise DataError(f"n must be >= 1, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    coeffs = rng.standard_normal(poly6_exponents().shape[0])
    xs = rng.standard_normal((2 * n, 6))
    ys = poly6_eval(xs, coeffs)[:, None]
    return _assemble("poly6", xs[:n], ys[:n], xs[n:], ys[n:], standardize_targets)


def _assemble(name, train_x, train_y, val_x, val_y, standardize_targets) -> Dataset:
    mean, std = standardize_stats(train_x)
    train_x = (train_x - mean) / std
    val_x = (val_x - mean) / std
    if standardize_targets:
        ymean, ystd = standardize_stats(train_y)
        train_y = (train_y - ymean) / ystd
        val_y = (val_y - ymean) / ystd
    return Dataset(
        name=name,
        train_x=train_x,
        train_y=train_y,
        val_x=val_x,
        val_y=val_y,
        mean=mean,
        std=std,
    )


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _read_exact(f, n: int, path) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise DataError(f"{path}: truncated, wanted {n} more bytes, got {len(buf)}")
    return buf


def read_idx_images(path) -> np.ndarray:
    """Parse a big-endian IDX image file into a (count, rows, cols) uint8 array."""
    path = Path(path)
    with open(path, "rb") as f:
        magic, count, rows, cols = struct.unpack(">iiii", _read_exact(f, 16, path))
        if magic != IDX_IMAGE_MAGIC:
            raise DataError(f"{path}: bad image magic {magic}, expected {IDX_IMAGE_MAGIC}")
        if min(count, rows, cols) < 0:
            raise DataError(f"{path}: negative dimension in header ({count}, {rows}, {cols})")
        data = _read_exact(f, count * rows * cols, path)
    return np.frombuffer(data, dtype=np.uint8).reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as f:
        magic, count = struct.unpack(">ii", _read_exact(f, 8, path))
        if magic != IDX_LABEL_MAGIC:
            raise DataError(f"{path}: bad label magic {magic}, expected {IDX_LABEL_MAGIC}")
        data = _read_exact(f, count, path)
    return np.frombuffer(data, dtype=np.uint8)


def write_idx_images(path, images: np.ndarray):
    images = np.ascontiguousarray(images, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">iiii", IDX_IMAGE_MAGIC, *images.shape))
        f.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray):
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">ii", IDX_LABEL_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())


def load_mnist(mnist_dir) -> Dataset:
    """Load the uncompressed IDX quartet, flatten, and standardize.

    Pixels are standardized by the scalar mean/std of the whole training
    split. Targets are one-hot vectors; integer labels are retained for the
    cross-entropy loss.
    """
    mnist_dir = Path(mnist_dir)
    arrays = {}
    for key, fname in MNIST_FILES.items():
        fpath = mnist_dir / fname
        if not fpath.exists():
            raise DataError(f"missing MNIST file {fpath}")
        arrays[key] = (
            read_idx_images(fpath) if "images" in key else read_idx_labels(fpath)
        )
    for split in ("train", "val"):
        n_img = arrays[f"{split}_images"].shape[0]
        n_lab = arrays[f"{split}_labels"].shape[0]
        if n_img != n_lab:
            raise DataError(f"{split}: {n_img} images but {n_lab} labels")

    train_x = arrays["train_images"].reshape(arrays["train_images"].shape[0], -1)
    val_x = arrays["val_images"].reshape(arrays["val_images"].shape[0], -1)
    train_x = train_x.astype(np.float64)
    val_x = val_x.astype(np.float64)
    mean = np.float64(train_x.mean())
    std = np.float64(train_x.std())
    if std == 0.0:
        std = np.float64(1.0)
    train_labels = arrays["train_labels"].astype(np.int64)
    val_labels = arrays["val_labels"].astype(np.int64)
    return Dataset(
        name="mnist",
        train_x=(train_x - mean) / std,
        train_y=one_hot(train_labels, 10),
        val_x=(val_x - mean) / std,
        val_y=one_hot(val_labels, 10),
        mean=np.full(train_x.shape[1], mean),
        std=np.full(train_x.shape[1], std),
        train_labels=train_labels,
        val_labels=val_labels,
    )


MNIST_BASE_URL = "https://storage.googleapis.com/cvdf-datasets/mnist/"


def fetch_mnist(dest_dir, base_url: str = MNIST_BASE_URL):
    """Download and decompress the MNIST quartet. Network access; explicit opt-in."""
    dest = Path(dest_dir)
    dest.mkdir(parents=True, exist_ok=True)
    for fname in MNIST_FILES.values():
        target = dest / fname
        if target.exists():
            continue
        url = base_url + fname + ".gz"
        with urllib.request.urlopen(url) as resp:
            blob = gzip.decompress(resp.read())
        target.write_bytes(blob)
    return dest


def save_matrix(path, m: np.ndarray):
    """Write one float64 matrix to the little-endian container format.

    Layout: 4-byte magic "SVNM", u32 version, u32 rows, u32 cols (16-byte
    header), then rows*cols little-endian float64 values in row-major order.
    """
    m = np.ascontiguousarray(m, dtype="<f8")
    if m.ndim != 2:
        raise DataError(f"container stores 2-D matrices, got shape {m.shape}")
    with open(path, "wb") as f:
        f.write(CONTAINER_MAGIC)
        f.write(struct.pack("<III", CONTAINER_VERSION, m.shape[0], m.shape[1]))
        f.write(m.tobytes())


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, path)
        if magic != CONTAINER_MAGIC:
            raise DataError(f"{path}: bad container magic {magic!r}")
        version, rows, cols = struct.unpack("<III", _read_exact(f, 12, path))
        if version != CONTAINER_VERSION:
            raise DataError(f"{path}: unsupported container version {version}")
        data = _read_exact(f, rows * cols * 8, path)
    return np.frombuffer(data, dtype="<f8").reshape(rows, cols).copy()


@dataclass(frozen=True)
class BatchPlan:
    """Seeded shuffling schedule; identical (seed, epoch) gives identical order."""

    batch_size: int
    seed: int

    def __post_init__(self):
        if self.batch_size < 1:
            raise DataError(f"batch_size must be >= 1, got {self.batch_size}")


def epoch_permutation(plan: BatchPlan, n: int, epoch: int) -> np.ndarray:
    """Fisher-Yates shuffle of range(n), seeded by (plan.seed, epoch)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([plan.seed, epoch])))
    return rng.permutation(n)


def batches(dataset, plan: BatchPlan, epoch: int):
    """Index slices of one shuffled epoch; the final partial batch is included.

    dataset may be a Dataset (its training split is iterated) or a plain
    sample count.
    """
    n = dataset.n_train if isinstance(dataset, Dataset) else int(dataset)
    perm = epoch_permutation(plan, n, epoch)
    for start in range(0, n, plan.batch_size):
        yield perm[start : start + plan.batch_size]
