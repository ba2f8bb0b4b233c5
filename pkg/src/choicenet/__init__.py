"""Robust regression and classification with correlated output mixtures."""

from .autodiff import (
    GradCheckReport,
    RngState,
    Tape,
    Tensor,
    backward,
    grad_check,
    sample_standard_normal,
)
from .block import (
    CholeskyBlockConfig,
    CholeskyBlockParams,
    MixtureOutput,
    block_forward,
    block_predict,
    mixture_variance,
)
from .cholesky import (
    CorrelatedWeightSet,
    cholesky_transform,
    empirical_correlation,
    sample_correlated_weights,
)
from .data import (
    CorruptionSpec,
    LabeledDataset,
    RegressionDataset,
    corrupt_labels,
    corrupt_regression,
    expected_true_ratio,
    gen_blobs,
    gen_synthetic,
    load_csv_regression,
    load_idx,
)
from .losses import (
    ClassificationLossConfig,
    RegressionLossConfig,
    baseline_regression_loss,
    classification_mixture_loss,
    kl_rho_pi,
    mdn_nll,
    regression_mixture_loss,
    tukey_biweight_loss,
)
from .models import MlpSpec, build_model, model_predict
from .train import (
    OptimizerConfig,
    TrainReport,
    clip_gradients,
    evaluate_accuracy,
    evaluate_rmse_vs_reference,
    fit,
)

__version__ = "0.1.0"
