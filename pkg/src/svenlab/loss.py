"""Per-condition losses, effective residuals, and residual Jacobian assembly.

Three loss kinds are supported:

* ``l2_regression_signed`` -- scalar regression; the condition residual is the
  signed error f(x) - g(x) and the reported loss is its square. This is the
  numerically smooth realization of the exponent-1 path.
* ``label_regression`` -- ||f(x) - y||^2 against a target vector.
* ``cross_entropy`` -- negative log softmax probability of an integer label.

For the power kinds, a condition groups one or more samples (a micro-batch);
its effective residual is (sum of sub-losses) ** (kappa / 2) and its Jacobian
row follows by the chain rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from svenlab import net

LOSS_KINDS = ("l2_regression_signed", "label_regression", "cross_entropy")


class LossError(ValueError):
    """Loss-kind misconfiguration or inconsistent shapes."""


@dataclass(frozen=True)
class LossSpec:
    kind: str = "l2_regression_signed"
    kappa: float = 2.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise LossError(f"unknown loss kind {self.kind!r}, expect one of {LOSS_KINDS}")
        if not self.kappa > 0.0:
            raise LossError(f"kappa must be > 0, got {self.kappa}")

    @property
    def signed(self) -> bool:
        return self.kind == "l2_regression_signed"


@dataclass
class ResidualBatch:
    """Effective residuals and their Jacobian for one update step.

    residuals has one entry per condition; jacobian has one row per condition
    and one column per parameter in param_mask; per_sample_losses holds the
    raw non-negative sub-losses; condition_slices maps conditions to the
    contiguous sample ranges they aggregate.
    """

    residuals: np.ndarray
    jacobian: np.ndarray
    per_sample_losses: np.ndarray
    condition_slices: list[tuple[int, int]]


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_labels(labels: np.ndarray, n_classes: int):
    if labels.min() < 0 or labels.max() >= n_classes:
        raise LossError(
            f"label out of range [0, {n_classes}): got {labels.min()}..{labels.max()}"
        )


def per_sample_loss(spec: LossSpec, model: net.MlpModel, x, y) -> float:
    """Sub-loss of one sample; for the signed kind, the signed residual itself."""
    f, _ = net.forward(model, x)
    if spec.signed:
        if model.d_out != 1:
            raise LossError("l2_regression_signed requires scalar model output")
        target = float(np.asarray(y, dtype=np.float64).reshape(()))
        return float(f[0] - target)
    if spec.kind == "label_regression":
        yv = np.asarray(y, dtype=np.float64)
        if yv.shape != (model.d_out,):
            raise LossError(f"target shape {yv.shape} does not match d_out {model.d_out}")
        return float(np.sum((f - yv) ** 2))
    label = int(np.asarray(y).reshape(()))
    _check_labels(np.asarray([label]), model.d_out)
    zmax = f.max()
    return float(zmax + math.log(np.exp(f - zmax).sum()) - f[label])


def effective_residuals(spec: LossSpec, per_sample_losses, condition_slices) -> np.ndarray:
    """Per-condition residuals (sum of sub-losses) ** (kappa / 2).

    For the signed kind the inputs are signed residuals already and pass
    through unchanged; grouping is then not meaningful and is rejected.
    """
    values = np.asarray(per_sample_losses, dtype=np.float64)
    if spec.signed:
        if any(stop - start != 1 for start, stop in condition_slices):
            raise LossError(
                "l2_regression_signed does not aggregate: use micro_batch_size=1 "
                "or a power-kind loss"
            )
        return values.copy()
    if values.min() < 0.0:
        raise LossError(
            f"negative sub-loss {values.min()} under a power-kind loss; check the loss kind"
        )
    sums = np.array([values[start:stop].sum() for start, stop in condition_slices])
    return sums ** (spec.kappa / 2.0)


def condition_slices_for(n_samples: int, micro_batch_size: int) -> list[tuple[int, int]]:
    """Contiguous grouping of a batch into ceil(n / micro_batch_size) conditions."""
    if micro_batch_size < 1:
        raise LossError(f"micro_batch_size must be >= 1, got {micro_batch_size}")
    return [
        (start, min(start + micro_batch_size, n_samples))
        for start in range(0, n_samples, micro_batch_size)
    ]


def _cotangents_and_losses(
    spec: LossSpec, outputs: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-sample sub-losses, d(sub-loss)/d(outputs), and signed residuals if any."""
    if spec.signed:
        targets = np.asarray(y, dtype=np.float64).reshape(-1)
        signed = outputs[:, 0] - targets
        return signed**2, np.ones_like(outputs), signed
    if spec.kind == "label_regression":
        targets = np.asarray(y, dtype=np.float64)
        diff = outputs - targets
        return np.sum(diff**2, axis=1), 2.0 * diff, None
    labels = np.asarray(y).reshape(-1).astype(np.int64)
    _check_labels(labels, outputs.shape[1])
    p = _softmax(outputs)
    rows = np.arange(outputs.shape[0])
    zmax = outputs.max(axis=1)
    losses = zmax + np.log(np.exp(outputs - zmax[:, None]).sum(axis=1)) - outputs[rows, labels]
    cot = p.copy()
    cot[rows, labels] -= 1.0
    return losses, cot, None


def residual_jacobian(
    spec: LossSpec,
    model: net.MlpModel,
    x: np.ndarray,
    y: np.ndarray,
    micro_batch_size: int = 1,
    param_mask=None,
) -> ResidualBatch:
    """Effective residuals and their Jacobian rows for one batch.

    One row per condition, columns restricted to param_mask (all parameters
    when None). Rows use exact reverse-mode per-sample gradients and, for the
    power kinds, the chain-rule factor (kappa/2) * lsum ** (kappa/2 - 1); a
    condition with lsum == 0 and kappa < 2 is already satisfied and gets a
    zero row and zero residual instead of a singular factor.
    """
    xb = np.asarray(x, dtype=np.float64)
    if xb.ndim != 2 or xb.shape[0] == 0:
        raise LossError(f"batch must be non-empty 2-D, got shape {xb.shape}")
    n_batch = xb.shape[0]
    slices = condition_slices_for(n_batch, micro_batch_size)
    if spec.signed and micro_batch_size != 1:
        raise LossError("l2_regression_signed supports micro_batch_size=1 only")

    outputs, tape = net.forward_batch(model, xb)
    losses, cot, signed = _cotangents_and_losses(spec, outputs, y)
    grads = net.grad_batch(model, tape, cot)

    if spec.signed:
        residuals = signed
        rows = grads
    else:
        lsum = np.array([losses[a:b].sum() for a, b in slices])
        gsum = np.add.reduceat(grads, [a for a, _ in slices], axis=0)
        half_kappa = spec.kappa / 2.0
        residuals = lsum**half_kappa
        factor = np.zeros_like(lsum)
        live = lsum > 0.0
        factor[live] = half_kappa * lsum[live] ** (half_kappa - 1.0)
        if spec.kappa == 2.0:
            factor[~live] = 1.0  # limit of the chain rule; gsum vanishes there anyway
        rows = gsum * factor[:, None]

    if param_mask is not None:
        mask = np.asarray(param_mask, dtype=np.int64)
        if mask.size == 0:
            raise LossError("param_mask must be non-empty")
        rows = rows[:, mask]
    return ResidualBatch(
        residuals=residuals,
        jacobian=rows,
        per_sample_losses=losses,
        condition_slices=slices,
    )


def batch_mean_loss(spec: LossSpec, model: net.MlpModel, x, y) -> float:
    """Mean sub-loss over a batch (the reported loss metric)."""
    outputs, _ = net.forward_batch(model, np.asarray(x, dtype=np.float64))
    losses, _, _ = _cotangents_and_losses(spec, outputs, y)
    return float(losses.mean())


def batch_mean_loss_and_grad(
    spec: LossSpec, model: net.MlpModel, x, y
) -> tuple[float, np.ndarray]:
    """Mean sub-loss and its gradient w.r.t. theta, for first-order baselines."""
    xb = np.asarray(x, dtype=np.float64)
    outputs, tape = net.forward_batch(model, xb)
    losses, cot, signed = _cotangents_and_losses(spec, outputs, y)
    if spec.signed:
        cot = 2.0 * signed[:, None]  # gradient of the squared residual
    grad = net.grad_batch(model, tape, cot).sum(axis=0) / xb.shape[0]
    return float(losses.mean()), grad
