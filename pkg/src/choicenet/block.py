"""The correlated-mixture output block.

Per forward pass the block draws one base weight matrix W_* ~ N(mu_*, Sigma_*)
and one auxiliary matrix Z ~ N(0, Sigma_Z), then emits K mixture components
(pi_k, mu_k, Sigma_k, rho_k) per example.  Component 1 is pinned at rho = 1,
so its mean is the deterministic linear prediction mu_*^T h and its variance
collapses to the floor tau_inv; the remaining components carry input-dependent
correlations clamped smoothly to (-rho_max, rho_max).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import RngState, Tensor
from .errors import ConfigurationError, InputError, NumericDomainError


@dataclass
class CholeskyBlockConfig:
    K: int  # mixture count
    Q: int  # feature dimension (including the constant-1 feature)
    D: int  # output dimension
    tau_inv: float = 1e-2  # variance floor / expected target variance
    rho_max: float = 0.95  # clamp magnitude for non-target correlations

    def __post_init__(self):
        if self.K < 1 or self.Q < 1 or self.D < 1:
            raise ConfigurationError("block config: K, Q, D must be >= 1")
        if self.tau_inv <= 0:
            raise ConfigurationError("block config: tau_inv must be > 0")
        if not (0.0 < self.rho_max < 1.0):
            raise ConfigurationError("block config: rho_max must lie in (0, 1)")


class CholeskyBlockParams:
    """All learnable arrays of the block.

    Standard deviations are stored as unconstrained log-std and exponentiated,
    guaranteeing positivity without projection.
    """

    FIELDS = ("mu_star", "log_sigma_star", "log_sigma_z", "w_rho", "w_pi", "w_sigma0")

    def __init__(self, cfg: CholeskyBlockConfig, rng: RngState):
        Q, D, K = cfg.Q, cfg.D, cfg.K
        self.mu_star = Tensor(
            rng.standard_normal((Q, D)).data * np.sqrt(2.0 / Q), requires_grad=True
        )
        self.log_sigma_star = Tensor(np.full((Q, D), np.log(0.1)), requires_grad=True)
        self.log_sigma_z = Tensor(np.full((Q, D), np.log(0.1)), requires_grad=True)
        self.w_rho = Tensor(
            rng.standard_normal((K, Q)).data * np.sqrt(1.0 / Q), requires_grad=True
        )
        self.w_pi = Tensor(
            rng.standard_normal((K, Q)).data * np.sqrt(1.0 / Q), requires_grad=True
        )
        self.w_sigma0 = Tensor(
            rng.standard_normal((D, Q)).data * np.sqrt(1.0 / Q), requires_grad=True
        )

    def parameters(self) -> list[Tensor]:
        return [getattr(self, f) for f in self.FIELDS]

    def named_arrays(self) -> dict[str, np.ndarray]:
        return {f: getattr(self, f).data for f in self.FIELDS}

    def load_arrays(self, arrays: dict[str, np.ndarray]):
        for f in self.FIELDS:
            tgt = getattr(self, f)
            if arrays[f].shape != tgt.shape:
                raise ConfigurationError(
                    f"checkpoint: shape mismatch for {f}: {arrays[f].shape} vs {tgt.shape}"
                )
            tgt.data = arrays[f].astype(np.float64)

    def no_decay_parameters(self) -> list[Tensor]:
        """Log-std arrays; decaying them toward zero would push sigma to 1."""
        return [self.log_sigma_star, self.log_sigma_z]


@dataclass
class MixtureOutput:
    """Batched mixture parameters: pi (N,K), mu (N,K,D), sigma (N,K,D), rho (N,K)."""

    pi: Tensor
    mu: Tensor
    sigma: Tensor
    rho: Tensor


def mixture_variance(rho_k, sigma0, tau_inv: float):
    """Per-dimension variance (1 - rho^2) * sigma0 + tau_inv."""
    rho_vals = rho_k.data if isinstance(rho_k, Tensor) else np.asarray(rho_k)
    sig_vals = sigma0.data if isinstance(sigma0, Tensor) else np.asarray(sigma0)
    if np.any(np.abs(rho_vals) > 1.0):
        raise NumericDomainError("mixture_variance: |rho| must be <= 1")
    if np.any(sig_vals <= 0.0):
        raise NumericDomainError("mixture_variance: sigma0 must be > 0")
    if tau_inv <= 0.0:
        raise NumericDomainError("mixture_variance: tau_inv must be > 0")
    rho_k = ad._as_tensor(rho_k)
    sigma0 = ad._as_tensor(sigma0)
    return (1.0 - ad.square(rho_k)) * sigma0 + tau_inv


def block_forward(
    params: CholeskyBlockParams, cfg: CholeskyBlockConfig, h: Tensor, rng: RngState
) -> MixtureOutput:
    """One forward pass over a batch of features h (N, Q).

    A single W_*, Z draw is shared across the batch.  Because the transform is
    affine in (W_*, Z), the per-example means are computed as three matmuls
    combined with the per-example rho weights, which is exactly the
    elementwise transform followed by mu_k = W~_k^T h.
    """
    h = ad._as_tensor(h)
    if not np.all(np.isfinite(h.data)):
        raise InputError("block_forward: non-finite feature values")
    if h.data.ndim != 2 or h.shape[1] != cfg.Q:
        raise ConfigurationError(f"block_forward: h must be (N, {cfg.Q}), got {h.shape}")
    K = cfg.K

    # Correlations: first column pinned to 1, rest smoothly clamped.
    rho_logits = h @ params.w_rho.T  # (N, K)
    ones = Tensor(np.ones((h.shape[0], 1)))
    if K > 1:
        rho_rest = cfg.rho_max * ad.tanh(rho_logits[:, 1:])
        rho = ad.concat([ones, rho_rest], axis=1)
    else:
        rho = ones

    pi = ad.softmax(h @ params.w_pi.T)  # (N, K)
    # Clamp the log-variance logits so exp neither underflows to an exact
    # zero nor overflows when the head drifts during training.
    sigma0_logits = h @ params.w_sigma0.T  # (N, D)
    sigma0_logits = -ad.maximum_const(-ad.maximum_const(sigma0_logits, -30.0), -30.0)
    sigma0 = ad.exp(sigma0_logits)

    sigma_star = ad.exp(params.log_sigma_star)
    sigma_z = ad.exp(params.log_sigma_z)

    # Reparametrized draws, one per step.
    eps1 = rng.standard_normal((cfg.Q, cfg.D))
    eps2 = rng.standard_normal((cfg.Q, cfg.D))
    w_star = params.mu_star + sigma_star * eps1
    z_draw = sigma_z * eps2

    m_mu = h @ params.mu_star  # (N, D): mu_*^T h
    m_dev = h @ ((sigma_z / sigma_star) * (w_star - params.mu_star))
    m_z = h @ z_draw

    mu_parts = []
    sig_parts = []
    for k in range(K):
        rho_k = rho[:, k : k + 1]  # (N, 1)
        root = ad.sqrt(1.0 - ad.square(rho_k))
        mu_k = rho_k * m_mu + root * (rho_k * m_dev + root * m_z)  # (N, D)
        sig_k = mixture_variance(rho_k, sigma0, cfg.tau_inv)  # (N, D)
        mu_parts.append(ad.reshape(mu_k, (h.shape[0], 1, cfg.D)))
        sig_parts.append(ad.reshape(sig_k, (h.shape[0], 1, cfg.D)))

    return MixtureOutput(
        pi=pi,
        mu=ad.concat(mu_parts, axis=1),
        sigma=ad.concat(sig_parts, axis=1),
        rho=rho,
    )


def block_predict(params: CholeskyBlockParams, cfg: CholeskyBlockConfig, h: Tensor) -> Tensor:
    """Deterministic prediction mu_1 = mu_*^T h (the rho = 1 component)."""
    h = ad._as_tensor(h)
    if not np.all(np.isfinite(h.data)):
        raise InputError("block_predict: non-finite feature values")
    if h.data.ndim != 2 or h.shape[1] != cfg.Q:
        raise ConfigurationError(f"block_predict: h must be (N, {cfg.Q}), got {h.shape}")
    return h @ params.mu_star
