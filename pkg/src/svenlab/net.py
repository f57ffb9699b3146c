"""Minimal MLP with exact GeLU, deterministic initialization, and exact
reverse-mode gradients, both per-sample and batched.

Parameters live in a single flat float64 vector; the flatten order is, per
layer, the weight matrix in row-major order followed by the bias vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class NetError(ValueError):
    """Invalid model configuration or mismatched shapes."""


def n_params(layer_dims) -> int:
    """Total parameter count: sum over layers of fan_in * fan_out + fan_out."""
    return sum(d_in * d_out + d_out for d_in, d_out in zip(layer_dims[:-1], layer_dims[1:]))


@dataclass
class MlpModel:
    """Layer widths plus the flat parameter vector theta."""

    layer_dims: tuple[int, ...]
    theta: np.ndarray

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def d_in(self) -> int:
        return self.layer_dims[0]

    @property
    def d_out(self) -> int:
        return self.layer_dims[-1]


def init_mlp(layer_dims, seed: int) -> MlpModel:
    """Initialize weights and biases i.i.d. uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)].

    Deterministic per seed; the per-layer draw order matches the flatten order.
    """
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise NetError(f"layer_dims needs >= 2 entries, all >= 1, got {dims}")
    rng = np.random.Generator(np.random.PCG64(seed))
    chunks = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / math.sqrt(d_in)
        chunks.append(rng.uniform(-bound, bound, size=d_in * d_out + d_out))
    return MlpModel(layer_dims=dims, theta=np.concatenate(chunks))


def unflatten(model: MlpModel) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split theta into per-layer (weight, bias) views; weight is (fan_out, fan_in)."""
    dims = model.layer_dims
    if model.theta.shape != (n_params(dims),):
        raise NetError(
            f"theta length {model.theta.shape} does not match layer_dims {dims}"
        )
    layers = []
    off = 0
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        w = model.theta[off : off + d_in * d_out].reshape(d_out, d_in)
        off += d_in * d_out
        b = model.theta[off : off + d_out]
        off += d_out
        layers.append((w, b))
    return layers


def flatten(layers) -> np.ndarray:
    """Inverse of unflatten: concatenate row-major weights and biases per layer."""
    return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in layers])


def gelu(x):
    """Exact GeLU, 0.5 * x * (1 + erf(x / sqrt(2)))."""
    x = np.asarray(x, dtype=np.float64)
    out = 0.5 * x * (1.0 + erf(x * _INV_SQRT2))
    return out if out.ndim else float(out)


def gelu_prime(x):
    """d/dx of exact GeLU: 0.5 * (1 + erf(x / sqrt(2))) + x * phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    out = 0.5 * (1.0 + erf(x * _INV_SQRT2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return out if out.ndim else float(out)


@dataclass
class ForwardTape:
    """Per-layer pre-activations and input activations for one reverse pass.

    inputs[l] is the vector fed into layer l; pre[l] is the affine output of
    layer l before the activation (the last layer has no activation).
    """

    layer_dims: tuple[int, ...]
    inputs: list = field(default_factory=list)
    pre: list = field(default_factory=list)


def forward(model: MlpModel, x) -> tuple[np.ndarray, ForwardTape]:
    """Evaluate the network on one input vector, retaining a tape.

    Hidden layers are affine followed by GeLU; the output layer is affine.
    """
    xv = np.asarray(x, dtype=np.float64)
    if xv.shape != (model.d_in,):
        raise NetError(f"input shape {xv.shape} does not match d_in {model.d_in}")
    tape = ForwardTape(layer_dims=model.layer_dims)
    layers = unflatten(model)
    z = xv
    for i, (w, b) in enumerate(layers):
        tape.inputs.append(z)
        a = w @ z + b
        tape.pre.append(a)
        z = a if i == len(layers) - 1 else gelu(a)
    return z, tape


def grad_scalar(model: MlpModel, tape: ForwardTape, seed_grad) -> np.ndarray:
    """Exact reverse-mode gradient of <seed_grad, f(x)> w.r.t. theta.

    The tape must come from forward() on the same architecture; the result is
    in flatten order.
    """
    if tape.layer_dims != model.layer_dims or len(tape.pre) != model.n_layers:
        raise NetError("tape does not match model architecture")
    cot = np.asarray(seed_grad, dtype=np.float64)
    if cot.shape != (model.d_out,):
        raise NetError(f"seed_grad shape {cot.shape} does not match d_out {model.d_out}")
    grads = [None] * model.n_layers
    delta = cot
    for l in range(model.n_layers - 1, -1, -1):
        z = tape.inputs[l]
        grads[l] = (np.outer(delta, z), delta)
        if l > 0:
            w, _ = _layer_view(model, l)
            delta = (w.T @ delta) * gelu_prime(tape.pre[l - 1])
    return flatten(grads)


def _layer_view(model: MlpModel, l: int) -> tuple[np.ndarray, np.ndarray]:
    dims = model.layer_dims
    off = sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(l))
    d_in, d_out = dims[l], dims[l + 1]
    w = model.theta[off : off + d_in * d_out].reshape(d_out, d_in)
    b = model.theta[off + d_in * d_out : off + d_in * d_out + d_out]
    return w, b


@dataclass
class BatchTape:
    """Batched counterpart of ForwardTape; rows index samples."""

    layer_dims: tuple[int, ...]
    inputs: list = field(default_factory=list)
    pre: list = field(default_factory=list)


def forward_batch(model: MlpModel, x: np.ndarray) -> tuple[np.ndarray, BatchTape]:
    """Evaluate the network on a (batch, d_in) matrix of inputs."""
    xb = np.asarray(x, dtype=np.float64)
    if xb.ndim != 2 or xb.shape[1] != model.d_in:
        raise NetError(f"batch shape {xb.shape} does not match d_in {model.d_in}")
    tape = BatchTape(layer_dims=model.layer_dims)
    layers = unflatten(model)
    z = xb
    for i, (w, b) in enumerate(layers):
        tape.inputs.append(z)
        a = z @ w.T + b
        tape.pre.append(a)
        z = a if i == len(layers) - 1 else gelu(a)
    return z, tape


def grad_batch(model: MlpModel, tape: BatchTape, cotangents: np.ndarray) -> np.ndarray:
    """Per-sample gradients of <cotangents[b], f(x_b)>, one row per sample.

    Equivalent to calling grad_scalar per sample; returns a (batch, n_params)
    matrix in flatten order.
    """
    if tape.layer_dims != model.layer_dims or len(tape.pre) != model.n_layers:
        raise NetError("tape does not match model architecture")
    cot = np.asarray(cotangents, dtype=np.float64)
    n_batch = tape.inputs[0].shape[0]
    if cot.shape != (n_batch, model.d_out):
        raise NetError(f"cotangent shape {cot.shape} does not match ({n_batch}, {model.d_out})")
    out = np.empty((n_batch, n_params(model.layer_dims)))
    offsets = []
    off = 0
    for d_in, d_out in zip(model.layer_dims[:-1], model.layer_dims[1:]):
        offsets.append(off)
        off += d_in * d_out + d_out
    delta = cot
    for l in range(model.n_layers - 1, -1, -1):
        z = tape.inputs[l]
        d_in, d_out = model.layer_dims[l], model.layer_dims[l + 1]
        o = offsets[l]
        gw = np.einsum("bo,bi->boi", delta, z)
        out[:, o : o + d_in * d_out] = gw.reshape(n_batch, d_out * d_in)
        out[:, o + d_in * d_out : o + d_in * d_out + d_out] = delta
        if l > 0:
            w, _ = _layer_view(model, l)
            delta = (delta @ w) * gelu_prime(tape.pre[l - 1])
    return out
