"""Optimizers, the minibatch fit loop, and evaluation metrics."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import RngState, Tape, Tensor
from .data import LabeledDataset, _fn_on_range
from .errors import ConfigurationError, NumericDomainError
from .models import Model


@dataclass
class OptimizerConfig:
    kind: str = "adam"  # sgd | sgd_momentum | adam
    learning_rate: float = 1e-3
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    clip_norm: float | None = None
    schedule: list = field(default_factory=list)  # [(epoch, lr multiplier), ...]

    def __post_init__(self):
        if self.kind not in ("sgd", "sgd_momentum", "adam"):
            raise ConfigurationError(f"unknown optimizer kind {self.kind!r}")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be > 0")
        epochs = [e for e, _ in self.schedule]
        if epochs != sorted(set(epochs)):
            raise ConfigurationError("schedule epochs must be strictly increasing")


class Optimizer:
    def __init__(self, params: list[Tensor], cfg: OptimizerConfig, no_decay: list[Tensor] = ()):
        self.params = params
        self.cfg = cfg
        self.lr_scale = 1.0
        self._no_decay_ids = {id(p) for p in no_decay}
        self._moments = [np.zeros_like(p.data) for p in params]
        self._second = [np.zeros_like(p.data) for p in params]
        self._t = 0

    def step(self):
        cfg = self.cfg
        lr = cfg.learning_rate * self.lr_scale
        self._t += 1
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if cfg.weight_decay > 0.0 and id(p) not in self._no_decay_ids:
                g = g + cfg.weight_decay * p.data
            if cfg.kind == "sgd":
                p.data -= lr * g
            elif cfg.kind == "sgd_momentum":
                self._moments[i] = cfg.momentum * self._moments[i] + g
                p.data -= lr * self._moments[i]
            else:  # adam
                self._moments[i] = cfg.beta1 * self._moments[i] + (1 - cfg.beta1) * g
                self._second[i] = cfg.beta2 * self._second[i] + (1 - cfg.beta2) * g * g
                m_hat = self._moments[i] / (1 - cfg.beta1**self._t)
                v_hat = self._second[i] / (1 - cfg.beta2**self._t)
                p.data -= lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
            if not np.all(np.isfinite(p.data)):
                raise NumericDomainError("optimizer step produced non-finite parameters")

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def apply_schedule(self, epoch: int):
        for e, mult in self.cfg.schedule:
            if e == epoch:
                self.lr_scale *= mult


def clip_gradients(params: list[Tensor], clip_norm: float) -> float:
    """Scale all gradients so the global L2 norm is at most clip_norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = float(np.sqrt(total))
    if norm > clip_norm:
        factor = clip_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= factor
    return norm


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_metric: float
    test_metric: float
    wall_seconds: float


@dataclass
class TrainReport:
    records: list = field(default_factory=list)

    def final(self) -> EpochRecord | None:
        return self.records[-1] if self.records else None


def fit(
    model: Model,
    x: np.ndarray,
    y: np.ndarray,
    opt_cfg: OptimizerConfig,
    epochs: int,
    batch_size: int,
    rng: RngState,
    eval_fn=None,
    eval_every: int = 1,
    start_epoch: int = 0,
) -> TrainReport:
    """Shuffled minibatch training.  ``eval_fn(model) -> (train_metric,
    test_metric)`` is called every ``eval_every`` epochs; other epochs reuse
    the previous metrics in the report.

    ``start_epoch`` offsets the recorded epoch numbers (and the points at
    which schedule entries fire) so that staged recipes — e.g. a warmup
    phase followed by a main phase — produce one continuous epoch sequence.
    """
    n = len(x)
    if n == 0:
        raise ConfigurationError("fit: empty dataset")
    if batch_size < 1:
        raise ConfigurationError("fit: batch_size must be >= 1")

    opt = Optimizer(model.parameters(), opt_cfg, no_decay=model.no_decay_parameters())
    report = TrainReport()
    start = time.perf_counter()
    metrics = (float("nan"), float("nan"))

    for epoch in range(start_epoch, start_epoch + epochs):
        opt.apply_schedule(epoch)
        order = rng.permutation(n)
        losses = []
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            xb, yb = Tensor(x[idx]), Tensor(y[idx])
            with Tape():
                loss = model.loss(xb, yb, rng)
                if not np.all(np.isfinite(loss.data)):
                    raise NumericDomainError(
                        f"fit: non-finite loss at epoch {epoch}, step {lo // batch_size}"
                    )
                ad.backward(loss)
            if opt_cfg.clip_norm is not None:
                clip_gradients(opt.params, opt_cfg.clip_norm)
            opt.step()
            opt.zero_grad()
            losses.append(loss.item())
        if eval_fn is not None and (epoch % eval_every == 0 or epoch == start_epoch + epochs - 1):
            metrics = eval_fn(model)
        report.records.append(
            EpochRecord(
                epoch=epoch,
                train_loss=float(np.mean(losses)),
                train_metric=float(metrics[0]),
                test_metric=float(metrics[1]),
                wall_seconds=time.perf_counter() - start,
            )
        )
    return report


def evaluate_rmse_vs_reference(model: Model, reference_fn: str, x_range, grid_points: int = 1000) -> float:
    """RMSE between predictions and the clean reference on an even grid."""
    lo, hi = x_range
    grid = np.linspace(lo, hi, grid_points)
    f = _fn_on_range(reference_fn, x_range)
    pred = model.predict(grid.reshape(-1, 1)).reshape(-1)
    return float(np.sqrt(np.mean((pred - f(grid)) ** 2)))


def evaluate_accuracy(model: Model, ds: LabeledDataset, use_true_labels: bool = False) -> float:
    """Fraction of argmax predictions matching the (noisy or true) labels."""
    if len(ds) == 0:
        raise ConfigurationError("evaluate_accuracy: empty dataset")
    scores = model.predict(ds.x)
    pred = np.argmax(scores, axis=1)
    target = ds.true_labels if use_true_labels else ds.labels
    return float(np.mean(pred == target))


def evaluate_rmse(model: Model, x: np.ndarray, y: np.ndarray) -> float:
    pred = model.predict(x)
    return float(np.sqrt(np.mean((pred - y) ** 2)))
