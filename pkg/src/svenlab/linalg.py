"""Dense linear algebra: SVD factors, a dense SVD oracle, randomized truncated
SVD via Gaussian range finding, and pseudoinverse application.

All matrices are dense row-major float64 numpy arrays. Randomness is driven by
explicit integer seeds through numpy's PCG64 generator, so every operation is
bit-reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Singular values below this fraction of s[0] are round-off rank and are
# treated as exact zeros everywhere (truncation and inversion), regardless
# of the user-facing rtol.
MACHINE_RANK_RTOL = 1e-14

# Range-finder defaults: oversampling columns and power-iteration passes.
OVERSAMPLE = 8
POWER_ITERS = 2


class LinalgError(ValueError):
    """Invalid input to a linear-algebra operation."""


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD factors u (m, r), s (r,), vt (r, n).

    s is non-negative and sorted descending; columns of u and rows of vt are
    orthonormal; r never exceeds min(m, n).
    """

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray

    @property
    def rank(self) -> int:
        return self.s.shape[0]

    @property
    def n_rows(self) -> int:
        return self.u.shape[0]

    @property
    def n_cols(self) -> int:
        return self.vt.shape[1]


def _as_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise LinalgError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise LinalgError(f"{name} contains non-finite entries")
    return a


def dense_svd(m) -> SvdFactors:
    """Full thin SVD of a dense matrix, the oracle for small systems.

    Returns min(rows, cols) factors; reconstruction u @ diag(s) @ vt matches m
    to relative Frobenius error below 1e-10.
    """
    a = _as_matrix(m)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(
            "dense SVD failed to converge for a "
            f"{a.shape[0]}x{a.shape[1]} matrix with ||m||_F = {np.linalg.norm(a):.6e}"
        ) from exc
    return SvdFactors(u=u, s=s, vt=vt)


def _truncate(f: SvdFactors, k: int, rtol: float) -> SvdFactors:
    """Keep at most k leading factors, dropping s_i < rtol * s_0 and round-off rank."""
    r = min(k, f.rank)
    if r == 0 or f.s[0] <= 0.0:
        return SvdFactors(u=f.u[:, :0], s=f.s[:0], vt=f.vt[:0, :])
    floor = max(rtol, MACHINE_RANK_RTOL) * f.s[0]
    # s is descending, so the retained set is a prefix.
    r = int(np.searchsorted(-f.s[:r], -floor, side="right"))
    return SvdFactors(u=f.u[:, :r], s=f.s[:r], vt=f.vt[:r, :])


def randomized_truncated_svd(m, k: int, rtol: float, seed: int) -> SvdFactors:
    """Truncated SVD keeping at most the k largest singular values.

    Uses a Gaussian test matrix with OVERSAMPLE extra columns and POWER_ITERS
    power iterations, re-orthonormalizing (Householder QR) after each
    application of m or m^T; the projected (k + OVERSAMPLE)-column matrix is
    then decomposed with dense_svd. Retained values additionally satisfy
    s_i >= rtol * s_0. Deterministic for a fixed seed; cost O(k * rows * cols).
    """
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise LinalgError(f"k must be an integer >= 1, got {k!r}")
    if not (0.0 <= rtol < 1.0):
        raise LinalgError(f"rtol must lie in [0, 1), got {rtol!r}")
    a = _as_matrix(m)
    rows, cols = a.shape
    n_probe = k + OVERSAMPLE

    if n_probe >= min(rows, cols):
        # The sketch would span the whole thin side; the dense path is both
        # exact and cheaper here.
        return _truncate(dense_svd(a), k, rtol)

    rng = np.random.Generator(np.random.PCG64(seed))
    omega = rng.standard_normal((cols, n_probe))
    q, _ = np.linalg.qr(a @ omega)
    for _ in range(POWER_ITERS):
        z, _ = np.linalg.qr(a.T @ q)
        q, _ = np.linalg.qr(a @ z)
    b = q.T @ a
    fb = dense_svd(b)
    return _truncate(SvdFactors(u=q @ fb.u, s=fb.s, vt=fb.vt), k, rtol)


def _inverted_singular_values(s: np.ndarray) -> np.ndarray:
    """1/s_i where s_i is significant, 0 where s_i is zero or round-off rank."""
    if s.shape[0] == 0:
        return s
    floor = MACHINE_RANK_RTOL * s[0]
    out = np.zeros_like(s)
    keep = s > max(floor, 0.0)
    out[keep] = 1.0 / s[keep]
    return out


def pinv_apply(f: SvdFactors, r) -> np.ndarray:
    """Apply the Moore-Penrose pseudoinverse built from f to a vector.

    Computes vt.T @ (diag(s^-1) @ (u.T @ r)) without materializing the
    pseudoinverse; zero singular values invert to zero.
    """
    rvec = np.asarray(r, dtype=np.float64)
    if rvec.ndim != 1 or rvec.shape[0] != f.n_rows:
        raise LinalgError(
            f"residual length {rvec.shape} does not match factor rows {f.n_rows}"
        )
    t = f.u.T @ rvec
    t *= _inverted_singular_values(f.s)
    return f.vt.T @ t


def pinv_matrix(f: SvdFactors) -> np.ndarray:
    """Materialized pseudoinverse, for diagnostics and tests only."""
    return (f.vt.T * _inverted_singular_values(f.s)) @ f.u.T


def reconstruct(f: SvdFactors) -> np.ndarray:
    """u @ diag(s) @ vt."""
    return (f.u * f.s) @ f.vt
