"""Sven optimizer laboratory: truncated-SVD pseudoinverse updates, baseline
optimizers, benchmark datasets, and a deterministic training harness."""

__version__ = "0.1.0"

from svenlab.linalg import SvdFactors, dense_svd, pinv_apply, randomized_truncated_svd
from svenlab.net import MlpModel, forward, gelu, gelu_prime, grad_scalar, init_mlp
from svenlab.loss import LossSpec, ResidualBatch, effective_residuals, per_sample_loss, residual_jacobian
from svenlab.optim import (
    SvenConfig,
    adam_step,
    lbfgs_step,
    natgrad_step,
    polyak_sgd_step,
    rmsprop_step,
    sample_param_mask,
    sgd_step,
    sven_step,
)
from svenlab.data import Dataset, BatchPlan, batches, gen_poly6, gen_sine1d, load_mnist
from svenlab.harness import RunConfig, RunRecord, cli, emit_metrics, grid_scan, train_run
