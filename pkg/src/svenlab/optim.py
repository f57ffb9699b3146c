"""Update rules: the Sven truncated-SVD pseudoinverse step with micro-batching
and parameter batching, the under-parametrized natural-gradient reference, and
the first-order / quasi-Newton baselines (SGD, Polyak SGD, RMSProp, Adam,
L-BFGS with strong Wolfe line search).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from svenlab import linalg

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
RMSPROP_RHO = 0.99
RMSPROP_EPS = 1e-8
POLYAK_EPS = 1e-12
WOLFE_C1 = 1e-4
WOLFE_C2 = 0.9
WOLFE_MAX_EVALS = 25
CURVATURE_SKIP_RTOL = 1e-10
NATGRAD_MAX_COND = 1e12


class OptimError(ValueError):
    """Invalid optimizer configuration or inputs."""


class UnderParametrizedError(OptimError):
    """The natural-gradient metric is singular; use the Sven step instead."""


@dataclass(frozen=True)
class SvenConfig:
    eta: float = 0.1
    k: int = 16
    rtol: float = 1e-3
    kappa: float = 2.0
    micro_batch_size: int = 1
    param_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.eta > 0.0:
            raise OptimError(f"eta must be > 0, got {self.eta}")
        if self.k < 1:
            raise OptimError(f"k must be >= 1, got {self.k}")
        if not (0.0 <= self.rtol < 1.0):
            raise OptimError(f"rtol must lie in [0, 1), got {self.rtol}")
        if not self.kappa > 0.0:
            raise OptimError(f"kappa must be > 0, got {self.kappa}")
        if self.micro_batch_size < 1:
            raise OptimError(f"micro_batch_size must be >= 1, got {self.micro_batch_size}")
        if not (0.0 < self.param_fraction <= 1.0):
            raise OptimError(f"param_fraction must lie in (0, 1], got {self.param_fraction}")


@dataclass
class SvenStepInfo:
    """Diagnostics from one Sven step: the singular values actually retained."""

    singular_values: np.ndarray


def _require_finite(v: np.ndarray, name: str):
    if not np.isfinite(v).all():
        raise OptimError(f"non-finite values in {name}")


def sven_step(
    residuals,
    jacobian,
    cfg: SvenConfig,
    theta: np.ndarray,
    param_mask=None,
    step_seed: int | None = None,
) -> tuple[np.ndarray, SvenStepInfo]:
    """One pseudoinverse update: theta + delta with delta = -eta * M^+ R.

    M^+ is built from the randomized truncated SVD of the Jacobian at rank k /
    tolerance rtol. When param_mask is given, the Jacobian columns are assumed
    restricted to it and only those coordinates change. If every singular
    value is zeroed out, delta is zero. step_seed overrides cfg.seed so a
    driver can decorrelate the random projections across steps.
    """
    r = np.asarray(residuals, dtype=np.float64)
    m = np.asarray(jacobian, dtype=np.float64)
    if m.ndim != 2 or r.shape != (m.shape[0],):
        raise OptimError(f"residuals {r.shape} do not match jacobian rows {m.shape}")
    _require_finite(r, "residuals")
    n_update = m.shape[1]
    if param_mask is None:
        if n_update != theta.shape[0]:
            raise OptimError(
                f"jacobian columns {n_update} do not match parameter count {theta.shape[0]}"
            )
    elif len(param_mask) != n_update:
        raise OptimError(f"param_mask length {len(param_mask)} != jacobian columns {n_update}")

    seed = cfg.seed if step_seed is None else step_seed
    factors = linalg.randomized_truncated_svd(m, cfg.k, cfg.rtol, seed)
    delta = -cfg.eta * linalg.pinv_apply(factors, r)
    theta_new = theta.copy()
    if param_mask is None:
        theta_new += delta
    else:
        theta_new[param_mask] += delta
    return theta_new, SvenStepInfo(singular_values=factors.s.copy())


def sample_param_mask(n_total: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """ceil(fraction * n_total) distinct indices, uniform without replacement."""
    if not (0.0 < fraction <= 1.0):
        raise OptimError(f"fraction must lie in (0, 1], got {fraction}")
    if fraction == 1.0:
        return np.arange(n_total)
    n_pick = int(np.ceil(fraction * n_total))
    return np.sort(rng.choice(n_total, size=n_pick, replace=False))


def natgrad_step(residuals, jacobian, eta: float, theta: np.ndarray) -> np.ndarray:
    """Under-parametrized natural-gradient update, -eta * (M^T M)^-1 M^T R.

    Requires at least as many conditions as parameters and a numerically
    nonsingular metric; otherwise the pseudoinverse step is the right tool.
    """
    r = np.asarray(residuals, dtype=np.float64)
    m = np.asarray(jacobian, dtype=np.float64)
    if m.ndim != 2 or r.shape != (m.shape[0],):
        raise OptimError(f"residuals {r.shape} do not match jacobian rows {m.shape}")
    n_cond, n_par = m.shape
    if n_cond < n_par:
        raise UnderParametrizedError(
            f"{n_cond} conditions < {n_par} parameters: the metric M^T M is singular "
            "and cannot be directly inverted; use sven_step"
        )
    gram = m.T @ m
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond >= NATGRAD_MAX_COND:
        raise UnderParametrizedError(
            f"metric condition estimate {cond:.3e} >= {NATGRAD_MAX_COND:.0e}; use sven_step"
        )
    delta = scipy.linalg.solve(gram, m.T @ r, assume_a="pos")
    return theta - eta * delta


def sgd_step(theta: np.ndarray, grad, eta: float) -> np.ndarray:
    g = np.asarray(grad, dtype=np.float64)
    _require_finite(g, "gradient")
    return theta - eta * g


def polyak_sgd_step(theta: np.ndarray, grad, loss_value: float) -> np.ndarray:
    """Polyak step size with target loss 0: theta - L / (||g||^2 + eps) * g."""
    g = np.asarray(grad, dtype=np.float64)
    _require_finite(g, "gradient")
    step = loss_value / (float(g @ g) + POLYAK_EPS)
    return theta - step * g


@dataclass
class RmspropState:
    sq_avg: np.ndarray


def rmsprop_step(theta: np.ndarray, grad, state: RmspropState, eta: float) -> np.ndarray:
    g = np.asarray(grad, dtype=np.float64)
    _require_finite(g, "gradient")
    state.sq_avg = RMSPROP_RHO * state.sq_avg + (1.0 - RMSPROP_RHO) * g * g
    return theta - eta * g / (np.sqrt(state.sq_avg) + RMSPROP_EPS)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_step(theta: np.ndarray, grad, state: AdamState, eta: float) -> np.ndarray:
    g = np.asarray(grad, dtype=np.float64)
    _require_finite(g, "gradient")
    state.t += 1
    state.m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * g
    state.v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * g * g
    m_hat = state.m / (1.0 - ADAM_BETA1**state.t)
    v_hat = state.v / (1.0 - ADAM_BETA2**state.t)
    return theta - eta * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def fresh_state(kind: str, n: int):
    """Moment buffers for the stateful first-order baselines."""
    if kind == "rmsprop":
        return RmspropState(sq_avg=np.zeros(n))
    if kind == "adam":
        return AdamState(m=np.zeros(n), v=np.zeros(n))
    return None


@dataclass
class LbfgsState:
    """Curvature history and bookkeeping for lbfgs_step."""

    theta: np.ndarray
    history_size: int = 10
    s_hist: deque = field(default_factory=deque)
    y_hist: deque = field(default_factory=deque)
    rho_hist: deque = field(default_factory=deque)
    n_iters: int = 0
    line_search_failed: bool = False


def _two_loop_direction(g: np.ndarray, state: LbfgsState) -> np.ndarray:
    q = -g.copy()
    alphas = []
    for s, y, rho in zip(reversed(state.s_hist), reversed(state.y_hist), reversed(state.rho_hist)):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if state.s_hist:
        s, y = state.s_hist[-1], state.y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(
        zip(state.s_hist, state.y_hist, state.rho_hist), reversed(alphas)
    ):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def _cubic_interpolate(x1, f1, g1, x2, f2, g2) -> float:
    # Minimizer of the cubic through (x1, f1, g1), (x2, f2, g2); falls back to
    # bisection when the cubic has no interior minimum.
    lo, hi = (x1, x2) if x1 <= x2 else (x2, x1)
    d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2)
    rad = d1 * d1 - g1 * g2
    if rad >= 0.0:
        d2 = np.sqrt(rad) * (1.0 if x2 >= x1 else -1.0)
        denom = g2 - g1 + 2.0 * d2
        if denom != 0.0:
            x = x2 - (x2 - x1) * (g2 + d2 - d1) / denom
            if np.isfinite(x):
                return float(min(max(x, lo), hi))
    return 0.5 * (lo + hi)


def _strong_wolfe(phi, alpha0: float):
    """Strong Wolfe line search (bracket + zoom with cubic interpolation).

    phi(alpha) must return (value, derivative). Returns (alpha, value, ok);
    on failure ok is False and alpha is the best point seen.
    """
    f0, g0 = phi(0.0)
    evals = 0
    alpha_prev, f_prev, g_prev = 0.0, f0, g0
    alpha = alpha0
    best = (0.0, f0)
    bracket = None
    while evals < WOLFE_MAX_EVALS:
        f, g = phi(alpha)
        evals += 1
        if f < best[1]:
            best = (alpha, f)
        if f > f0 + WOLFE_C1 * alpha * g0 or (evals > 1 and f >= f_prev):
            bracket = (alpha_prev, f_prev, g_prev, alpha, f, g)
            break
        if abs(g) <= -WOLFE_C2 * g0:
            return alpha, f, True
        if g >= 0.0:
            bracket = (alpha, f, g, alpha_prev, f_prev, g_prev)
            break
        alpha_prev, f_prev, g_prev = alpha, f, g
        alpha *= 2.0
    if bracket is None:
        return best[0], best[1], False

    lo, f_lo, g_lo, hi, f_hi, g_hi = bracket
    while evals < WOLFE_MAX_EVALS:
        alpha = _cubic_interpolate(lo, f_lo, g_lo, hi, f_hi, g_hi)
        span = abs(hi - lo)
        if span < 1e-16 or abs(alpha - lo) < 0.05 * span or abs(alpha - hi) < 0.05 * span:
            alpha = lo + 0.5 * (hi - lo)
        f, g = phi(alpha)
        evals += 1
        if f < best[1]:
            best = (alpha, f)
        if f > f0 + WOLFE_C1 * alpha * g0 or f >= f_lo:
            hi, f_hi, g_hi = alpha, f, g
        else:
            if abs(g) <= -WOLFE_C2 * g0:
                return alpha, f, True
            if g * (hi - lo) >= 0.0:
                hi, f_hi, g_hi = lo, f_lo, g_lo
            lo, f_lo, g_lo = alpha, f, g
    return best[0], best[1], False


def lbfgs_step(
    loss_fn,
    grad_fn,
    state: LbfgsState,
    eta: float,
    max_iter: int,
    history_size: int,
) -> np.ndarray:
    """Up to max_iter L-BFGS iterations on the objective seen by loss_fn/grad_fn.

    Directions come from the two-loop recursion over at most history_size
    curvature pairs; step lengths from a strong Wolfe search. Pairs with
    s.y <= 1e-10 ||s|| ||y|| are skipped. A failed line search accepts the
    best point found and flags state.line_search_failed.
    """
    state.history_size = history_size
    g = np.asarray(grad_fn(state.theta), dtype=np.float64)
    _require_finite(g, "gradient")
    for _ in range(max_iter):
        if np.abs(g).max() <= 1e-14:
            break
        d = _two_loop_direction(g, state)
        if d @ g >= 0.0:
            # Not a descent direction (stale curvature); restart from -g.
            state.s_hist.clear()
            state.y_hist.clear()
            state.rho_hist.clear()
            d = -g.copy()
        if state.n_iters == 0:
            alpha0 = eta * min(1.0, 1.0 / np.abs(g).sum())
        else:
            alpha0 = eta
        theta0 = state.theta

        def phi(a, theta0=theta0, d=d):
            th = theta0 + a * d
            return float(loss_fn(th)), float(np.asarray(grad_fn(th)) @ d)

        alpha, _, ok = _strong_wolfe(phi, alpha0)
        if not ok:
            state.line_search_failed = True
        if alpha == 0.0:
            break
        theta_new = theta0 + alpha * d
        g_new = np.asarray(grad_fn(theta_new), dtype=np.float64)
        s = theta_new - theta0
        y = g_new - g
        sy = s @ y
        if sy > CURVATURE_SKIP_RTOL * np.linalg.norm(s) * np.linalg.norm(y):
            state.s_hist.append(s)
            state.y_hist.append(y)
            state.rho_hist.append(1.0 / sy)
            while len(state.s_hist) > history_size:
                state.s_hist.popleft()
                state.y_hist.popleft()
                state.rho_hist.popleft()
        state.theta = theta_new
        g = g_new
        state.n_iters += 1
    return state.theta
