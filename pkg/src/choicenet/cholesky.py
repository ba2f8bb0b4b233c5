"""Correlated weight sampling via the scalar Cholesky transform.

Given a base draw ``w ~ N(mu_w, sigma_w^2)`` and an independent auxiliary draw
``z ~ N(0, sigma_z^2)``, the transform produces a variable whose Pearson
correlation with ``w`` is exactly ``rho``:

    rho * mu_w + sqrt(1 - rho^2) * (rho * (sigma_z / sigma_w) * (w - mu_w)
                                    + z * sqrt(1 - rho^2))

At rho = 1 the output collapses to mu_w deterministically; at rho = 0 it
equals z.  The output has mean rho * mu_w, variance (1 - rho^2) * sigma_z^2,
and correlation rho with the base draw, for every rho in [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import RngState, Tensor
from .errors import DegenerateInputError, NumericDomainError


def _value(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def cholesky_transform(w, z, rho, mu_w, sigma_w, sigma_z):
    """Map (w, z) to a variable correlated with w at level rho.

    All arguments may be plain arrays or tape tensors; gradients flow through
    every input.  Elementwise over matching/broadcastable shapes.
    """
    sw = _value(sigma_w)
    sz = _value(sigma_z)
    r = _value(rho)
    if np.any(sw <= 0.0) or np.any(sz <= 0.0):
        raise NumericDomainError("cholesky_transform: sigma_w and sigma_z must be > 0")
    if np.any(np.abs(r) > 1.0):
        raise NumericDomainError("cholesky_transform: |rho| must be <= 1")

    w, z, rho = ad._as_tensor(w), ad._as_tensor(z), ad._as_tensor(rho)
    mu_w, sigma_w, sigma_z = (
        ad._as_tensor(mu_w),
        ad._as_tensor(sigma_w),
        ad._as_tensor(sigma_z),
    )
    root = ad.sqrt(1.0 - ad.square(rho))
    inner = rho * (sigma_z / sigma_w) * (w - mu_w) + z * root
    return rho * mu_w + root * inner


@dataclass
class CorrelatedWeightSet:
    """One base draw, one auxiliary draw and the K correlated matrices."""

    base_sample: Tensor  # W_* draw, Q x D
    aux_sample: Tensor  # Z draw, Q x D
    correlations: list  # length K; entry 0 is exactly 1
    tilde: list = field(default_factory=list)  # K tensors, Q x D each


def sample_correlated_weights(mu, sigma, sigma_z, rho, rng: RngState) -> CorrelatedWeightSet:
    """Draw W_* = mu + sigma*eps1 and Z = sigma_z*eps2, then build the K
    correlated matrices elementwise.  Gradients flow to mu, sigma, sigma_z and
    rho through the reparametrized draws.

    ``rho`` is a sequence of K scalars (tensors or floats) with rho[0] == 1.
    """
    mu = ad._as_tensor(mu)
    sigma = ad._as_tensor(sigma)
    sigma_z = ad._as_tensor(sigma_z)
    if np.any(sigma.data <= 0.0) or np.any(sigma_z.data <= 0.0):
        raise NumericDomainError("sample_correlated_weights: sigma entries must be > 0")
    rho = list(rho)
    if float(_value(rho[0])) != 1.0:
        raise NumericDomainError("sample_correlated_weights: rho[0] must be exactly 1")

    eps1 = rng.standard_normal(mu.shape)
    eps2 = rng.standard_normal(mu.shape)
    base = mu + sigma * eps1
    aux = sigma_z * eps2

    tilde = [cholesky_transform(base, aux, r, mu, sigma, sigma_z) for r in rho]
    return CorrelatedWeightSet(base_sample=base, aux_sample=aux, correlations=rho, tilde=tilde)


def empirical_correlation(xs, ys) -> float:
    """Pearson sample correlation of two equal-length sequences."""
    xs = np.asarray(xs, dtype=np.float64).reshape(-1)
    ys = np.asarray(ys, dtype=np.float64).reshape(-1)
    if xs.size != ys.size or xs.size < 2:
        raise DegenerateInputError("empirical_correlation: need equal lengths >= 2")
    xc = xs - xs.mean()
    yc = ys - ys.mean()
    vx = float(xc @ xc)
    vy = float(yc @ yc)
    if vx == 0.0 or vy == 0.0:
        raise DegenerateInputError("empirical_correlation: zero sample variance")
    r = float(xc @ yc) / np.sqrt(vx * vy)
    return float(np.clip(r, -1.0, 1.0))
