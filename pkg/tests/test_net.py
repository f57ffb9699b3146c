import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svenlab import net
from svenlab.net import (
    MlpModel,
    NetError,
    flatten,
    forward,
    forward_batch,
    gelu,
    gelu_prime,
    grad_batch,
    grad_scalar,
    init_mlp,
    n_params,
    unflatten,
)

# 0.5 * (1 + erf(1/sqrt(2))) to 20 digits, from an independent high-precision
# erf evaluation (mpmath, dps=40).
GELU_AT_ONE = 0.84134474606854294859


def count_params_oracle(dims):
    # Independent counting: every layer carries fan_out rows of fan_in weights
    # plus fan_out biases.
    total = 0
    for i in range(len(dims) - 1):
        total += dims[i] * dims[i + 1] + dims[i + 1]
    return total


class TestInit:
    def test_param_count_sine_architecture(self):
        dims = [1, 16, 16, 16, 1]
        model = init_mlp(dims, seed=0)
        assert model.theta.shape == (count_params_oracle(dims),)
        assert n_params(dims) == count_params_oracle(dims) == 593

    def test_param_count_poly_architecture(self):
        dims = [6, 16, 16, 16, 1]
        assert n_params(dims) == count_params_oracle(dims) == 673

    def test_deterministic(self):
        a = init_mlp([3, 8, 2], seed=77)
        b = init_mlp([3, 8, 2], seed=77)
        np.testing.assert_array_equal(a.theta, b.theta)
        c = init_mlp([3, 8, 2], seed=78)
        assert not np.array_equal(a.theta, c.theta)

    def test_bounds_follow_fan_in(self):
        model = init_mlp([4, 9, 1], seed=5)
        (w1, b1), (w2, b2) = unflatten(model)
        assert np.abs(w1).max() <= 1.0 / 2.0 and np.abs(b1).max() <= 1.0 / 2.0
        assert np.abs(w2).max() <= 1.0 / 3.0 and np.abs(b2).max() <= 1.0 / 3.0

    def test_bad_dims_rejected(self):
        with pytest.raises(NetError):
            init_mlp([], seed=0)
        with pytest.raises(NetError):
            init_mlp([4], seed=0)
        with pytest.raises(NetError):
            init_mlp([4, 0, 2], seed=0)


class TestGelu:
    def test_zero(self):
        assert gelu(0.0) == 0.0

    def test_value_at_one(self):
        assert abs(gelu(1.0) - GELU_AT_ONE) < 1e-14

    def test_prime_matches_finite_differences(self):
        xs = np.linspace(-4.0, 4.0, 81)
        h = 1e-6
        fd = (gelu(xs + h) - gelu(xs - h)) / (2 * h)
        assert np.max(np.abs(gelu_prime(xs) - fd)) <= 1e-8

    def test_vectorized_matches_scalar(self):
        xs = np.array([-2.0, -0.5, 0.3, 1.7])
        np.testing.assert_array_equal(gelu(xs), [gelu(float(x)) for x in xs])


class TestForward:
    def test_zero_parameters_give_zero_output(self):
        dims = (3, 5, 5, 5, 2)
        model = MlpModel(dims, np.zeros(n_params(dims)))
        y, _ = forward(model, np.array([0.4, -1.0, 2.0]))
        np.testing.assert_array_equal(y, np.zeros(2))

    def test_depth_zero_reduces_to_affine(self):
        model = init_mlp([3, 2], seed=1)
        x = np.array([0.5, -1.5, 2.0])
        y, _ = forward(model, x)
        w, b = unflatten(model)[0]
        np.testing.assert_allclose(y, w @ x + b, atol=1e-15)

    def test_matches_independent_evaluator(self):
        import math

        model = init_mlp([2, 6, 4, 3, 2], seed=9)
        rng = np.random.default_rng(3)
        x = rng.standard_normal(2)
        y, _ = forward(model, x)
        # Straight-line oracle written with python scalars only.
        z = [float(v) for v in x]
        layers = unflatten(model)
        for i, (w, b) in enumerate(layers):
            nxt = []
            for row in range(w.shape[0]):
                acc = float(b[row])
                for col in range(w.shape[1]):
                    acc += float(w[row, col]) * z[col]
                nxt.append(acc)
            if i < len(layers) - 1:
                nxt = [0.5 * v * (1.0 + math.erf(v / math.sqrt(2.0))) for v in nxt]
            z = nxt
        np.testing.assert_allclose(y, z, rtol=1e-12, atol=1e-12)

    def test_shape_mismatch(self):
        model = init_mlp([3, 2], seed=1)
        with pytest.raises(NetError):
            forward(model, np.zeros(4))

    def test_batch_matches_per_sample(self):
        model = init_mlp([3, 7, 7, 7, 2], seed=21)
        rng = np.random.default_rng(4)
        xs = rng.standard_normal((5, 3))
        batch_out, _ = forward_batch(model, xs)
        for i in range(5):
            y, _ = forward(model, xs[i])
            np.testing.assert_allclose(batch_out[i], y, atol=1e-12)


class TestGradScalar:
    def test_zero_cotangent(self):
        model = init_mlp([2, 4, 1], seed=2)
        _, tape = forward(model, np.array([1.0, -1.0]))
        g = grad_scalar(model, tape, np.array([0.0]))
        assert np.all(g == 0.0)

    def test_linear_model_analytic(self):
        model = init_mlp([3, 1], seed=3)
        x = np.array([0.3, -2.0, 1.1])
        _, tape = forward(model, x)
        g = grad_scalar(model, tape, np.array([1.0]))
        np.testing.assert_allclose(g[:3], x)
        assert g[3] == 1.0

    def test_matches_finite_differences_many_models(self):
        rng = np.random.default_rng(100)
        for trial in range(20):
            dims = (int(rng.integers(1, 4)), 5, 4, 5, int(rng.integers(1, 3)))
            model = init_mlp(dims, seed=trial)
            x = rng.standard_normal(dims[0])
            cot = rng.standard_normal(dims[-1])
            _, tape = forward(model, x)
            g = grad_scalar(model, tape, cot)
            h = 1e-4
            idx = rng.choice(model.theta.shape[0], size=min(25, model.theta.shape[0]), replace=False)
            for i in idx:
                tp = model.theta.copy()
                tp[i] += h
                tm = model.theta.copy()
                tm[i] -= h
                fp, _ = forward(MlpModel(dims, tp), x)
                fm, _ = forward(MlpModel(dims, tm), x)
                fd = float(cot @ (fp - fm)) / (2 * h)
                assert abs(g[i] - fd) / (1.0 + abs(g[i])) <= 1e-5

    def test_stale_tape_rejected(self):
        model = init_mlp([2, 4, 1], seed=2)
        other = init_mlp([2, 5, 1], seed=2)
        _, tape = forward(other, np.array([1.0, -1.0]))
        with pytest.raises(NetError):
            grad_scalar(model, tape, np.array([1.0]))

    def test_batch_matches_per_sample(self):
        model = init_mlp([2, 6, 6, 6, 3], seed=33)
        rng = np.random.default_rng(5)
        xs = rng.standard_normal((4, 2))
        cots = rng.standard_normal((4, 3))
        _, btape = forward_batch(model, xs)
        rows = grad_batch(model, btape, cots)
        for i in range(4):
            _, tape = forward(model, xs[i])
            np.testing.assert_allclose(rows[i], grad_scalar(model, tape, cots[i]), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_flatten_unflatten_roundtrip(seed):
    rng = np.random.default_rng(seed)
    n_layers = int(rng.integers(1, 4))
    dims = tuple(int(d) for d in rng.integers(1, 6, size=n_layers + 1))
    theta = rng.standard_normal(n_params(dims))
    model = MlpModel(dims, theta)
    rebuilt = flatten(unflatten(model))
    np.testing.assert_array_equal(rebuilt, theta)
