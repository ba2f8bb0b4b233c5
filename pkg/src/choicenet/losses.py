"""Training objectives: the correlated-mixture losses and all baseline losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import RngState, Tensor
from .block import MixtureOutput
from .errors import (
    ConfigurationError,
    DegenerateInputError,
    InputError,
    NumericDomainError,
)

LOG_2PI = float(np.log(2.0 * np.pi))

# Consistency constants for the robust loss: Tukey cutoff and the MAD-to-sigma
# scale for Gaussian residuals.
TUKEY_C = 4.685
MAD_SCALE = 1.4826


@dataclass
class RegressionLossConfig:
    lambda1: float = 1.0  # squared-error weight on the target component
    lambda2: float = 1.0  # mixture negative log-likelihood weight
    lambda_kl: float = 0.01  # correlation-vs-pi KL regularizer weight

    def __post_init__(self):
        if min(self.lambda1, self.lambda2, self.lambda_kl) < 0:
            raise ConfigurationError("regression loss weights must be non-negative")


@dataclass
class ClassificationLossConfig:
    lambda_reg: float = 1e-4  # log-sum-exp magnitude penalty
    lambda_kl: float = 0.01  # weight of KL(softmax(rho) || pi)

    def __post_init__(self):
        if self.lambda_reg < 0:
            raise ConfigurationError("lambda_reg must be non-negative")
        if self.lambda_kl < 0:
            raise ConfigurationError("lambda_kl must be non-negative")


def _mixture_log_likelihood(pi: Tensor, mu: Tensor, sigma: Tensor, y: Tensor) -> Tensor:
    """Per-example log sum_k pi_k N(y; mu_k, diag sigma_k), shift-stabilized.

    pi: (N, K); mu, sigma: (N, K, D); y: (N, D).  Returns (N,).
    """
    if np.any(sigma.data <= 0.0):
        raise NumericDomainError("mixture likelihood: sigma must be > 0")
    n, d = y.shape
    y3 = ad.reshape(y, (n, 1, d))
    diff = y3 - mu
    log_comp = ad.tsum(
        -0.5 * (LOG_2PI + ad.log(sigma)) - ad.square(diff) / (2.0 * sigma), axis=2
    )  # (N, K)
    return ad.logsumexp(ad.log(pi) + log_comp)


def kl_rho_pi(rho: Tensor, pi: Tensor) -> Tensor:
    """KL(softmax(rho) || pi), summed over the last axis, averaged over any batch."""
    pi = ad._as_tensor(pi)
    rho = ad._as_tensor(rho)
    if np.any(pi.data <= 0.0):
        raise NumericDomainError("kl_rho_pi: pi entries must be > 0")
    rbar = ad.softmax(rho)
    kl = ad.tsum(rbar * (ad.log(rbar) - ad.log(pi)), axis=-1)
    return ad.tmean(kl) if kl.data.ndim > 0 else kl


def regression_mixture_loss(out: MixtureOutput, y, cfg: RegressionLossConfig) -> Tensor:
    """Weighted sum of target squared error, mixture NLL and the KL regularizer."""
    y = ad._as_tensor(y)
    n = y.shape[0]
    if out.mu.shape[0] != n:
        raise ConfigurationError("regression_mixture_loss: batch sizes differ")

    mu1 = ad.reshape(out.mu[:, 0:1, :], (n, y.shape[1]))
    l2 = ad.tmean(ad.tsum(ad.square(y - mu1), axis=1))

    nll = -ad.tmean(_mixture_log_likelihood(out.pi, out.mu, out.sigma, y))
    kl = kl_rho_pi(out.rho, out.pi)

    loss = cfg.lambda1 * l2 + cfg.lambda2 * nll + cfg.lambda_kl * kl
    if not np.all(np.isfinite(loss.data)):
        raise NumericDomainError("regression_mixture_loss: non-finite loss value")
    return loss


def classification_mixture_loss(
    out: MixtureOutput, y, cfg: ClassificationLossConfig, rng: RngState
) -> Tensor:
    """Negative expected one-hot agreement of the sampled per-component logits.

    Logits are drawn as mu_k + sqrt(sigma_k) * eps with one fresh eps per
    (example, component, dimension); gradients flow via reparametrization.
    """
    y = ad._as_tensor(y)
    vals = y.data
    if vals.ndim != 2 or not (
        np.all((vals == 0.0) | (vals == 1.0)) and np.all(vals.sum(axis=1) == 1.0)
    ):
        raise InputError("classification_mixture_loss: y rows must be one-hot")
    if np.any(out.sigma.data <= 0.0):
        raise NumericDomainError("classification_mixture_loss: sigma must be > 0")

    n, k, d = out.mu.shape
    eps = rng.standard_normal((n, k, d))
    y_hat = out.mu + ad.sqrt(out.sigma) * eps  # (N, K, D)

    inner = ad.tsum(ad.softmax(y_hat) * ad.reshape(y, (n, 1, d)), axis=2)  # (N, K)
    lse = ad.logsumexp(y_hat)  # (N, K)
    per_component = inner - cfg.lambda_reg * lse
    loss = -ad.tmean(ad.tsum(out.pi * per_component, axis=1))
    if cfg.lambda_kl > 0:
        loss = loss + cfg.lambda_kl * kl_rho_pi(out.rho, out.pi)
    if not np.all(np.isfinite(loss.data)):
        raise NumericDomainError("classification_mixture_loss: non-finite loss value")
    return loss


def baseline_regression_loss(kind: str, pred, y) -> Tensor:
    """Plain mean squared error or mean absolute error."""
    pred = ad._as_tensor(pred)
    y = ad._as_tensor(y)
    if pred.shape != y.shape:
        raise ConfigurationError(
            f"baseline_regression_loss: shape mismatch {pred.shape} vs {y.shape}"
        )
    if kind == "L2":
        return ad.tmean(ad.square(pred - y))
    if kind == "L1":
        return ad.tmean(ad.absolute(pred - y))
    raise ConfigurationError(f"baseline_regression_loss: unknown kind {kind!r}")


def mad_scale(residuals: np.ndarray) -> float:
    """1.4826 * median absolute deviation of the residuals."""
    r = np.asarray(residuals, dtype=np.float64).reshape(-1)
    if r.size < 2:
        raise DegenerateInputError("mad_scale: need at least 2 residuals")
    mad = float(np.median(np.abs(r - np.median(r))))
    if mad == 0.0:
        raise DegenerateInputError("mad_scale: zero MAD")
    return MAD_SCALE * mad


def tukey_biweight_loss(
    pred, y, c: float = TUKEY_C, leaky_slope: float = 0.0, scale: float | None = None
) -> Tensor:
    """Tukey's biweight applied to MAD-standardized residuals.

    leaky_slope = 0 gives the saturating robust loss (bounded by c^2/6 per
    example); leaky_slope > 0 keeps a linear tail beyond the cutoff.  Pass an
    explicit ``scale`` to freeze the standardization (the default recomputes it
    from the residual values and treats it as a constant).
    """
    if c <= 0:
        raise ConfigurationError("tukey_biweight_loss: c must be > 0")
    if leaky_slope < 0:
        raise ConfigurationError("tukey_biweight_loss: leaky_slope must be >= 0")
    pred = ad._as_tensor(pred)
    y = ad._as_tensor(y)
    e = ad.reshape(pred - y, (pred.size,))
    if scale is None:
        scale = mad_scale(e.data)
    r = e / float(scale)

    inside = np.abs(r.data) <= c
    one_minus = 1.0 - ad.square(r / c)
    core = (c * c / 6.0) * (1.0 - one_minus * one_minus * one_minus)
    tail = (c * c / 6.0) + leaky_slope * (ad.absolute(r) - c)
    return ad.tmean(ad.where_mask(inside, core, tail))


def mdn_nll(pi: Tensor, mu: Tensor, sigma: Tensor, y) -> Tensor:
    """Mean negative log mixture likelihood (stable log-sum-exp form)."""
    y = ad._as_tensor(y)
    return -ad.tmean(_mixture_log_likelihood(pi, mu, sigma, y))
