import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svenlab import net
from svenlab.loss import (
    LossError,
    LossSpec,
    batch_mean_loss,
    batch_mean_loss_and_grad,
    condition_slices_for,
    effective_residuals,
    per_sample_loss,
    residual_jacobian,
)

LN_10 = 2.302585092994045684


def small_model(dims=(2, 5, 4, 5, 1), seed=0):
    return net.init_mlp(dims, seed=seed)


class TestLossSpec:
    def test_rejects_unknown_kind(self):
        with pytest.raises(LossError):
            LossSpec(kind="huber")

    def test_rejects_nonpositive_kappa(self):
        with pytest.raises(LossError):
            LossSpec(kind="label_regression", kappa=0.0)


class TestPerSampleLoss:
    def test_perfect_fit_is_zero_all_kinds(self):
        model = small_model()
        x = np.array([0.2, -0.4])
        y, _ = net.forward(model, x)
        assert per_sample_loss(LossSpec("l2_regression_signed"), model, x, y) == 0.0
        vec_model = small_model(dims=(2, 5, 3), seed=1)
        yv, _ = net.forward(vec_model, x)
        assert per_sample_loss(LossSpec("label_regression"), vec_model, x, yv) == 0.0

    def test_label_regression_direct_formula(self):
        dims = (2, 2)
        theta = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])  # identity map
        model = net.MlpModel(dims, theta)
        val = per_sample_loss(
            LossSpec("label_regression"), model, np.array([1.0, 0.0]), np.array([0.0, 1.0])
        )
        assert val == 2.0

    def test_cross_entropy_uniform_logits(self):
        dims = (3, 10)
        model = net.MlpModel(dims, np.zeros(net.n_params(dims)))
        val = per_sample_loss(LossSpec("cross_entropy"), model, np.zeros(3), 4)
        assert abs(val - LN_10) < 1e-12

    def test_cross_entropy_stable_at_large_logits(self):
        dims = (1, 2)
        model = net.MlpModel(dims, np.array([1000.0, -1000.0, 0.0, 0.0]))
        val = per_sample_loss(LossSpec("cross_entropy"), model, np.array([1.0]), 0)
        assert np.isfinite(val) and val >= 0.0

    def test_cross_entropy_label_out_of_range(self):
        dims = (3, 10)
        model = net.MlpModel(dims, np.zeros(net.n_params(dims)))
        with pytest.raises(LossError):
            per_sample_loss(LossSpec("cross_entropy"), model, np.zeros(3), 10)

    def test_signed_returns_signed_residual(self):
        model = small_model()
        x = np.array([0.7, 0.1])
        f, _ = net.forward(model, x)
        r = per_sample_loss(LossSpec("l2_regression_signed"), model, x, f[0] + 0.5)
        assert abs(r + 0.5) < 1e-12


class TestEffectiveResiduals:
    def test_kappa_two_is_identity_on_sums(self):
        spec = LossSpec("label_regression", kappa=2.0)
        losses = np.array([1.0, 2.0, 3.0, 4.0])
        slices = condition_slices_for(4, 2)
        np.testing.assert_allclose(effective_residuals(spec, losses, slices), [3.0, 7.0])

    def test_kappa_one_square_root(self):
        spec = LossSpec("label_regression", kappa=1.0)
        out = effective_residuals(spec, np.array([4.0]), [(0, 1)])
        np.testing.assert_allclose(out, [2.0])

    def test_single_condition_equals_total_batch_loss(self):
        spec = LossSpec("label_regression", kappa=2.0)
        losses = np.array([0.5, 1.5, 2.0])
        out = effective_residuals(spec, losses, condition_slices_for(3, 3))
        np.testing.assert_allclose(out, [4.0])

    def test_negative_loss_rejected(self):
        spec = LossSpec("label_regression", kappa=2.0)
        with pytest.raises(LossError):
            effective_residuals(spec, np.array([1.0, -0.1]), condition_slices_for(2, 1))

    def test_signed_passthrough(self):
        spec = LossSpec("l2_regression_signed")
        vals = np.array([0.5, -1.5])
        np.testing.assert_array_equal(
            effective_residuals(spec, vals, condition_slices_for(2, 1)), vals
        )

    def test_signed_rejects_grouping(self):
        spec = LossSpec("l2_regression_signed")
        with pytest.raises(LossError):
            effective_residuals(spec, np.array([0.5, -1.5]), condition_slices_for(2, 2))


class TestResidualJacobian:
    def test_condition_count_is_ceil(self):
        model = small_model(dims=(2, 4, 1))
        rng = np.random.default_rng(0)
        x = rng.standard_normal((5, 2))
        y = rng.standard_normal((5, 1))
        rb = residual_jacobian(LossSpec("label_regression"), model, x, y, micro_batch_size=2)
        assert rb.residuals.shape == (3,)
        assert rb.jacobian.shape == (3, net.n_params(model.layer_dims))
        assert rb.condition_slices == [(0, 2), (2, 4), (4, 5)]

    def test_zero_residuals_give_zero_rows_kappa_two(self):
        model = small_model(dims=(2, 3, 2), seed=4)
        rng = np.random.default_rng(1)
        x = rng.standard_normal((3, 2))
        y, _ = net.forward_batch(model, x)
        rb = residual_jacobian(LossSpec("label_regression", kappa=2.0), model, x, y)
        np.testing.assert_allclose(rb.residuals, 0.0, atol=1e-30)
        np.testing.assert_allclose(rb.jacobian, 0.0, atol=1e-14)

    def test_linear_model_signed_row_is_input_and_one(self):
        dims = (3, 1)
        model = net.MlpModel(dims, np.array([0.5, -1.0, 2.0, 0.25]))
        x = np.array([[1.0, 2.0, -1.0]])
        y = np.array([[0.0]])
        rb = residual_jacobian(LossSpec("l2_regression_signed"), model, x, y)
        np.testing.assert_allclose(rb.jacobian[0], [1.0, 2.0, -1.0, 1.0])

    @pytest.mark.parametrize(
        "kind,kappa",
        [
            ("l2_regression_signed", 1.0),
            ("label_regression", 2.0),
            ("label_regression", 1.0),
            ("cross_entropy", 2.0),
        ],
    )
    def test_rows_match_finite_differences(self, kind, kappa):
        rng = np.random.default_rng(hash((kind, kappa)) % 2**32)
        d_out = 1 if kind == "l2_regression_signed" else 3
        dims = (2, 5, 4, 5, d_out)
        model = small_model(dims=dims, seed=11)
        spec = LossSpec(kind, kappa=kappa)
        x = rng.standard_normal((4, 2))
        if kind == "cross_entropy":
            y = rng.integers(0, d_out, size=4)
        else:
            y = rng.standard_normal((4, d_out))
        rb = residual_jacobian(spec, model, x, y, micro_batch_size=2 if kind != "l2_regression_signed" else 1)
        h = 1e-4

        def residuals_at(theta):
            m2 = net.MlpModel(dims, theta)
            return residual_jacobian(spec, m2, x, y, rb_mbs()).residuals

        def rb_mbs():
            return 2 if kind != "l2_regression_signed" else 1

        idx = rng.choice(model.theta.shape[0], size=30, replace=False)
        for i in idx:
            tp = model.theta.copy()
            tp[i] += h
            tm = model.theta.copy()
            tm[i] -= h
            fd = (residuals_at(tp) - residuals_at(tm)) / (2 * h)
            err = np.abs(fd - rb.jacobian[:, i]) / (1.0 + np.abs(rb.jacobian[:, i]))
            assert err.max() <= 1e-5

    def test_zero_sum_loss_with_fractional_kappa_zeroed(self):
        model = small_model(dims=(2, 3, 2), seed=4)
        rng = np.random.default_rng(2)
        x = rng.standard_normal((2, 2))
        y, _ = net.forward_batch(model, x)  # exact fit: sub-losses are zero
        rb = residual_jacobian(LossSpec("label_regression", kappa=1.0), model, x, y)
        np.testing.assert_array_equal(rb.residuals, 0.0)
        np.testing.assert_array_equal(rb.jacobian, 0.0)

    def test_param_mask_restricts_columns(self):
        model = small_model(dims=(2, 4, 1), seed=5)
        rng = np.random.default_rng(3)
        x = rng.standard_normal((3, 2))
        y = rng.standard_normal((3, 1))
        full = residual_jacobian(LossSpec("l2_regression_signed"), model, x, y)
        mask = np.array([0, 5, 7, 11])
        masked = residual_jacobian(LossSpec("l2_regression_signed"), model, x, y, param_mask=mask)
        np.testing.assert_array_equal(masked.jacobian, full.jacobian[:, mask])
        np.testing.assert_array_equal(masked.residuals, full.residuals)

    def test_signed_rejects_micro_batches(self):
        model = small_model(dims=(2, 4, 1), seed=5)
        x = np.zeros((4, 2))
        y = np.zeros((4, 1))
        with pytest.raises(LossError):
            residual_jacobian(LossSpec("l2_regression_signed"), model, x, y, micro_batch_size=2)

    def test_empty_batch_rejected(self):
        model = small_model(dims=(2, 4, 1), seed=5)
        with pytest.raises(LossError):
            residual_jacobian(LossSpec("l2_regression_signed"), model, np.zeros((0, 2)), np.zeros((0, 1)))

    def test_cross_entropy_row_uses_softmax_minus_onehot(self):
        dims = (2, 3)
        model = net.init_mlp(dims, seed=8)
        x = np.array([[0.4, -0.2]])
        y = np.array([1])
        rb = residual_jacobian(LossSpec("cross_entropy", kappa=2.0), model, x, y)
        logits, tape = net.forward(model, x[0])
        p = np.exp(logits - logits.max())
        p /= p.sum()
        cot = p.copy()
        cot[1] -= 1.0
        expected = net.grad_scalar(model, tape, cot)  # kappa=2: row is d(loss)/d(theta)
        np.testing.assert_allclose(rb.jacobian[0], expected, atol=1e-12)


class TestScaleCovariance:
    @settings(max_examples=15, deadline=None)
    @given(
        c=st.floats(min_value=0.01, max_value=100.0),
        kappa=st.sampled_from([1.0, 2.0, 3.0]),
    )
    def test_scaling_sub_losses_scales_residuals_and_rows(self, c, kappa):
        spec = LossSpec("label_regression", kappa=kappa)
        rng = np.random.default_rng(17)
        losses = rng.random(6) + 0.1
        slices = condition_slices_for(6, 2)
        base = effective_residuals(spec, losses, slices)
        scaled = effective_residuals(spec, c * losses, slices)
        np.testing.assert_allclose(scaled, c ** (kappa / 2.0) * base, rtol=1e-10)

    def test_jacobian_rows_scale_covariantly(self):
        # Scaling targets y -> f + c*(y - f) scales each sub-loss by c^2;
        # rows must scale by c^kappa for kappa-power kinds.
        model = small_model(dims=(2, 4, 2), seed=6)
        rng = np.random.default_rng(18)
        x = rng.standard_normal((4, 2))
        f, _ = net.forward_batch(model, x)
        y = f + rng.standard_normal((4, 2))
        c = 1.7
        y_scaled = f + c * (y - f)
        for kappa in (1.0, 2.0):
            spec = LossSpec("label_regression", kappa=kappa)
            rb = residual_jacobian(spec, model, x, y, micro_batch_size=2)
            rb_s = residual_jacobian(spec, model, x, y_scaled, micro_batch_size=2)
            np.testing.assert_allclose(rb_s.residuals, (c**2) ** (kappa / 2) * rb.residuals, rtol=1e-10)

    def test_single_condition_row_equals_whole_batch_gradient(self):
        model = small_model(dims=(2, 5, 4, 5, 2), seed=7)
        rng = np.random.default_rng(19)
        x = rng.standard_normal((6, 2))
        y = rng.standard_normal((6, 2))
        spec = LossSpec("label_regression", kappa=2.0)
        rb = residual_jacobian(spec, model, x, y, micro_batch_size=6)
        assert rb.jacobian.shape[0] == 1
        mean_loss, mean_grad = batch_mean_loss_and_grad(spec, model, x, y)
        np.testing.assert_allclose(rb.jacobian[0], 6.0 * mean_grad, rtol=1e-10)
        np.testing.assert_allclose(rb.residuals[0], 6.0 * mean_loss, rtol=1e-12)


class TestBatchMeanLoss:
    def test_matches_per_sample_mean(self):
        model = small_model(dims=(2, 4, 3), seed=9)
        rng = np.random.default_rng(20)
        x = rng.standard_normal((5, 2))
        y = rng.standard_normal((5, 3))
        spec = LossSpec("label_regression")
        per = [per_sample_loss(spec, model, x[i], y[i]) for i in range(5)]
        assert abs(batch_mean_loss(spec, model, x, y) - np.mean(per)) < 1e-12

    def test_signed_kind_reports_squared_residual(self):
        model = small_model(dims=(2, 4, 1), seed=9)
        rng = np.random.default_rng(21)
        x = rng.standard_normal((5, 2))
        y = rng.standard_normal((5, 1))
        spec = LossSpec("l2_regression_signed")
        per = [per_sample_loss(spec, model, x[i], y[i]) ** 2 for i in range(5)]
        assert abs(batch_mean_loss(spec, model, x, y) - np.mean(per)) < 1e-12

    def test_gradient_matches_finite_differences(self):
        model = small_model(dims=(2, 4, 2), seed=10)
        rng = np.random.default_rng(22)
        x = rng.standard_normal((4, 2))
        y = rng.standard_normal((4, 2))
        spec = LossSpec("label_regression")
        _, g = batch_mean_loss_and_grad(spec, model, x, y)
        h = 1e-5
        for i in rng.choice(model.theta.shape[0], size=12, replace=False):
            tp = model.theta.copy()
            tp[i] += h
            tm = model.theta.copy()
            tm[i] -= h
            fd = (
                batch_mean_loss(spec, net.MlpModel(model.layer_dims, tp), x, y)
                - batch_mean_loss(spec, net.MlpModel(model.layer_dims, tm), x, y)
            ) / (2 * h)
            assert abs(fd - g[i]) / (1.0 + abs(g[i])) < 1e-6
