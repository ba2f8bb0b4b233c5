"""Model assembly: MLP feature extractors with the mixture block or baseline heads."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import RngState, Tensor
from .block import (
    CholeskyBlockConfig,
    CholeskyBlockParams,
    MixtureOutput,
    block_forward,
    block_predict,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigurationError, InputError
from .losses import (
    ClassificationLossConfig,
    RegressionLossConfig,
    baseline_regression_loss,
    classification_mixture_loss,
    mdn_nll,
    regression_mixture_loss,
    tukey_biweight_loss,
)

MODEL_KINDS = ("choicenet", "mlp_l2", "mlp_l1", "mlp_robust", "mlp_leaky_robust", "mdn")

MDN_SIGMA_FLOOR = 1e-6


@dataclass
class MlpSpec:
    layer_widths: list = field(default_factory=lambda: [64, 64, 64])
    activation: str = "relu"
    output_dim: int = 1

    def __post_init__(self):
        if not self.layer_widths or any(w < 1 for w in self.layer_widths):
            raise ConfigurationError("MlpSpec: need at least one positive hidden width")
        if self.activation not in ("relu", "tanh"):
            raise ConfigurationError(f"MlpSpec: unknown activation {self.activation!r}")
        if self.output_dim < 1:
            raise ConfigurationError("MlpSpec: output_dim must be >= 1")


class Mlp:
    """Fully connected stack; ``forward`` returns the last hidden activation
    when ``features_only`` and the linear output head otherwise."""

    def __init__(self, in_dim: int, spec: MlpSpec, rng: RngState):
        self.spec = spec
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        dims = [in_dim] + list(spec.layer_widths) + [spec.output_dim]
        for i in range(len(dims) - 1):
            # He-style scaling keeps activations in range for both relu/tanh.
            w = rng.standard_normal((dims[i], dims[i + 1])).data * np.sqrt(2.0 / dims[i])
            self.weights.append(Tensor(w, requires_grad=True))
            self.biases.append(Tensor(np.zeros(dims[i + 1]), requires_grad=True))

    def _act(self, x: Tensor) -> Tensor:
        return ad.relu(x) if self.spec.activation == "relu" else ad.tanh(x)

    def features(self, x: Tensor) -> Tensor:
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = self._act(h @ w + b)
        return h

    def forward(self, x: Tensor) -> Tensor:
        return self.features(x) @ self.weights[-1] + self.biases[-1]

    def parameters(self) -> list[Tensor]:
        return self.weights + self.biases


def _check_input(x) -> Tensor:
    x = ad._as_tensor(x)
    if not np.all(np.isfinite(x.data)):
        raise InputError("model input contains non-finite values")
    return x


class Model:
    """Common surface: forward(x, rng) for training, predict(x) deterministic."""

    kind: str

    def parameters(self) -> list[Tensor]:
        raise NotImplementedError

    def no_decay_parameters(self) -> list[Tensor]:
        return []

    def forward(self, x, rng: RngState):
        raise NotImplementedError

    def predict(self, x) -> np.ndarray:
        raise NotImplementedError

    def loss(self, x, y, rng: RngState) -> Tensor:
        raise NotImplementedError

    def named_arrays(self) -> dict[str, np.ndarray]:
        return {f"p{i}": p.data for i, p in enumerate(self.parameters())}

    def save(self, path):
        save_checkpoint(path, self.named_arrays())

    def load(self, path):
        arrays = self.named_arrays()
        loaded = load_checkpoint(path)
        if set(loaded) != set(arrays):
            raise ConfigurationError("checkpoint: parameter name set mismatch")
        for (name, tgt), p in zip(arrays.items(), self.parameters()):
            if loaded[name].shape != p.shape:
                raise ConfigurationError(f"checkpoint: shape mismatch for {name}")
        for name, p in zip(arrays, self.parameters()):
            p.data = loaded[name]


class ChoiceNetModel(Model):
    """MLP features + correlated-mixture block.

    A constant-1 feature is appended to the extracted features so the block
    can express affine maps; Q counts that extra feature.
    """

    def __init__(
        self,
        in_dim: int,
        mlp: MlpSpec,
        block_cfg: CholeskyBlockConfig,
        rng: RngState,
        task: str = "regression",
        reg_loss: RegressionLossConfig | None = None,
        cls_loss: ClassificationLossConfig | None = None,
        loss_samples: int = 1,
    ):
        self.kind = "choicenet"
        self.task = task
        if loss_samples < 1:
            raise ConfigurationError("choicenet: loss_samples must be >= 1")
        self.loss_samples = loss_samples
        # While True the mixture-weight head is excluded from optimization,
        # holding pi near uniform; used as an opening phase so no component
        # starves before the means settle.
        self.freeze_pi = False
        feat_dim = mlp.layer_widths[-1]
        if block_cfg.Q != feat_dim + 1:
            raise ConfigurationError(
                f"choicenet: block Q must be feature width + 1 = {feat_dim + 1}"
            )
        self.mlp = Mlp(in_dim, mlp, rng)
        self.block_cfg = block_cfg
        self.block = CholeskyBlockParams(block_cfg, rng.spawn(1))
        self.reg_loss = reg_loss or RegressionLossConfig()
        self.cls_loss = cls_loss or ClassificationLossConfig()

    def _features(self, x: Tensor) -> Tensor:
        h = self.mlp.features(x)
        ones = Tensor(np.ones((h.shape[0], 1)))
        return ad.concat([h, ones], axis=1)

    def parameters(self) -> list[Tensor]:
        params = self.mlp.parameters() + self.block.parameters()
        if self.freeze_pi:
            params = [p for p in params if p is not self.block.w_pi]
        return params

    def no_decay_parameters(self) -> list[Tensor]:
        return self.block.no_decay_parameters()

    def forward(self, x, rng: RngState) -> MixtureOutput:
        x = _check_input(x)
        return block_forward(self.block, self.block_cfg, self._features(x), rng)

    def predict(self, x) -> np.ndarray:
        x = _check_input(x)
        return block_predict(self.block, self.block_cfg, self._features(x)).data

    def _loss_once(self, x, y, rng: RngState) -> Tensor:
        out = self.forward(x, rng)
        if self.task == "classification":
            return classification_mixture_loss(out, y, self.cls_loss, rng)
        return regression_mixture_loss(out, y, self.reg_loss)

    def loss(self, x, y, rng: RngState) -> Tensor:
        # Averaging several weight draws reduces the variance of the sampled
        # component means, which stabilizes mixture separation under heavy
        # corruption.
        if self.loss_samples == 1:
            return self._loss_once(x, y, rng)
        total = self._loss_once(x, y, rng.spawn(0))
        for s in range(1, self.loss_samples):
            total = total + self._loss_once(x, y, rng.spawn(s))
        return total * (1.0 / self.loss_samples)


class MlpModel(Model):
    """Plain MLP trained with an L2, L1, robust, or leaky-robust objective."""

    def __init__(self, kind: str, in_dim: int, mlp: MlpSpec, rng: RngState):
        if kind not in ("mlp_l2", "mlp_l1", "mlp_robust", "mlp_leaky_robust"):
            raise ConfigurationError(f"MlpModel: unknown kind {kind!r}")
        self.kind = kind
        self.mlp = Mlp(in_dim, mlp, rng)

    def parameters(self) -> list[Tensor]:
        return self.mlp.parameters()

    def forward(self, x, rng: RngState = None) -> Tensor:
        return self.mlp.forward(_check_input(x))

    def predict(self, x) -> np.ndarray:
        return self.mlp.forward(_check_input(x)).data

    def loss(self, x, y, rng: RngState = None) -> Tensor:
        pred = self.forward(x)
        y = ad._as_tensor(y)
        if self.kind == "mlp_l2":
            return baseline_regression_loss("L2", pred, y)
        if self.kind == "mlp_l1":
            return baseline_regression_loss("L1", pred, y)
        slope = 0.0 if self.kind == "mlp_robust" else 0.1
        return tukey_biweight_loss(pred, y, leaky_slope=slope)


class MdnModel(Model):
    """Dependency-free mixture density head over MLP features."""

    def __init__(self, in_dim: int, mlp: MlpSpec, mixture_k: int, rng: RngState):
        self.kind = "mdn"
        self.K = mixture_k
        self.D = mlp.output_dim
        self.mlp = Mlp(in_dim, mlp, rng)
        feat = mlp.layer_widths[-1]
        head_rng = rng.spawn(2)
        self.w_pi = Tensor(
            head_rng.standard_normal((feat, mixture_k)).data / np.sqrt(feat),
            requires_grad=True,
        )
        self.b_pi = Tensor(np.zeros(mixture_k), requires_grad=True)
        self.w_mu = Tensor(
            head_rng.standard_normal((feat, mixture_k * self.D)).data / np.sqrt(feat),
            requires_grad=True,
        )
        self.b_mu = Tensor(np.zeros(mixture_k * self.D), requires_grad=True)
        self.w_sig = Tensor(
            head_rng.standard_normal((feat, mixture_k * self.D)).data / np.sqrt(feat),
            requires_grad=True,
        )
        self.b_sig = Tensor(np.zeros(mixture_k * self.D), requires_grad=True)

    def parameters(self) -> list[Tensor]:
        return self.mlp.parameters() + [
            self.w_pi,
            self.b_pi,
            self.w_mu,
            self.b_mu,
            self.w_sig,
            self.b_sig,
        ]

    def forward(self, x, rng: RngState = None):
        h = self.mlp.features(_check_input(x))
        n = h.shape[0]
        pi = ad.softmax(h @ self.w_pi + self.b_pi)
        mu = ad.reshape(h @ self.w_mu + self.b_mu, (n, self.K, self.D))
        sigma = ad.exp(h @ self.w_sig + self.b_sig) + MDN_SIGMA_FLOOR
        sigma = ad.reshape(sigma, (n, self.K, self.D))
        return pi, mu, sigma

    def predict(self, x) -> np.ndarray:
        pi, mu, _ = self.forward(x)
        # argmax breaks ties toward the lowest index
        best = np.argmax(pi.data, axis=1)
        return mu.data[np.arange(len(best)), best, :]

    def loss(self, x, y, rng: RngState = None) -> Tensor:
        pi, mu, sigma = self.forward(x)
        return mdn_nll(pi, mu, sigma, y)


def build_model(
    kind: str,
    in_dim: int,
    mlp: MlpSpec,
    rng: RngState,
    block_cfg: CholeskyBlockConfig | None = None,
    mixture_k: int | None = None,
    task: str = "regression",
    reg_loss: RegressionLossConfig | None = None,
    cls_loss: ClassificationLossConfig | None = None,
    loss_samples: int = 1,
) -> Model:
    if kind == "choicenet":
        if block_cfg is None:
            raise ConfigurationError("build_model: choicenet requires block_cfg")
        return ChoiceNetModel(
            in_dim,
            mlp,
            block_cfg,
            rng,
            task=task,
            reg_loss=reg_loss,
            cls_loss=cls_loss,
            loss_samples=loss_samples,
        )
    if kind == "mdn":
        if mixture_k is None:
            raise ConfigurationError("build_model: mdn requires mixture_k")
        return MdnModel(in_dim, mlp, mixture_k, rng)
    if kind in ("mlp_l2", "mlp_l1", "mlp_robust", "mlp_leaky_robust"):
        return MlpModel(kind, in_dim, mlp, rng)
    raise ConfigurationError(f"build_model: unknown model kind {kind!r}")


def model_predict(model: Model, x) -> np.ndarray:
    """Deterministic predictions for any model kind."""
    return model.predict(x)
