import numpy as np
import pytest

from choicenet.autodiff import RngState, Tensor
from choicenet.data import LabeledDataset, gen_synthetic
from choicenet.errors import ConfigurationError, NumericDomainError
from choicenet.models import MlpModel, MlpSpec
from choicenet.train import (
    Optimizer,
    OptimizerConfig,
    clip_gradients,
    evaluate_accuracy,
    evaluate_rmse,
    evaluate_rmse_vs_reference,
    fit,
)


class QuadraticModel:
    """Minimal model with loss (p - 3)^2 summed over the batch dimension."""

    def __init__(self, init=0.0):
        self.p = Tensor(np.array(init), requires_grad=True)

    def parameters(self):
        return [self.p]

    def no_decay_parameters(self):
        return []

    def loss(self, x, y, rng=None):
        from choicenet import autodiff as ad

        return ad.square(self.p - 3.0)

    def predict(self, x):
        return np.full((len(x.data) if isinstance(x, Tensor) else len(x), 1), float(self.p.data))


class TestOptimizerConfig:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            OptimizerConfig(kind="rmsprop")
        with pytest.raises(ConfigurationError):
            OptimizerConfig(learning_rate=0.0)
        with pytest.raises(ConfigurationError):
            OptimizerConfig(schedule=[(5, 0.1), (2, 0.1)])


class TestOptimizerSteps:
    def test_sgd_hand_step(self):
        p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        p.grad = np.array([0.5, -1.0])
        opt = Optimizer([p], OptimizerConfig(kind="sgd", learning_rate=0.1))
        opt.step()
        assert np.max(np.abs(p.data - np.array([0.95, 2.1]))) <= 1e-12

    def test_momentum_accumulates(self):
        p = Tensor(np.array([0.0]), requires_grad=True)
        opt = Optimizer([p], OptimizerConfig(kind="sgd_momentum", learning_rate=0.1, momentum=0.5))
        p.grad = np.array([1.0])
        opt.step()  # v = 1, p = -0.1
        p.grad = np.array([1.0])
        opt.step()  # v = 1.5, p = -0.25
        assert p.data[0] == pytest.approx(-0.25, abs=1e-12)

    def test_adam_first_step_is_lr_sized(self):
        p = Tensor(np.array([0.0]), requires_grad=True)
        opt = Optimizer([p], OptimizerConfig(kind="adam", learning_rate=0.01))
        p.grad = np.array([7.0])
        opt.step()
        # bias correction makes the first update ~lr regardless of grad scale
        assert p.data[0] == pytest.approx(-0.01, abs=1e-5)

    def test_weight_decay_skips_no_decay_params(self):
        a = Tensor(np.array([2.0]), requires_grad=True)
        b = Tensor(np.array([2.0]), requires_grad=True)
        opt = Optimizer(
            [a, b],
            OptimizerConfig(kind="sgd", learning_rate=0.1, weight_decay=0.5),
            no_decay=[b],
        )
        a.grad = np.zeros(1)
        b.grad = np.zeros(1)
        opt.step()
        assert a.data[0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)
        assert b.data[0] == pytest.approx(2.0)

    def test_nonfinite_params_raise(self):
        p = Tensor(np.array([0.0]), requires_grad=True)
        opt = Optimizer([p], OptimizerConfig(kind="sgd", learning_rate=1.0))
        p.grad = np.array([np.inf])
        with pytest.raises(NumericDomainError):
            opt.step()

    def test_schedule_multiplies_at_epoch(self):
        p = Tensor(np.array([0.0]), requires_grad=True)
        opt = Optimizer(
            [p], OptimizerConfig(kind="sgd", learning_rate=1.0, schedule=[(2, 0.1)])
        )
        opt.apply_schedule(0)
        assert opt.lr_scale == 1.0
        opt.apply_schedule(2)
        assert opt.lr_scale == pytest.approx(0.1)
        opt.apply_schedule(3)
        assert opt.lr_scale == pytest.approx(0.1)


class TestClipGradients:
    def test_clips_to_norm(self):
        p = Tensor(np.zeros(2), requires_grad=True)
        p.grad = np.array([3.0, 4.0])
        norm = clip_gradients([p], 1.0)
        assert norm == pytest.approx(5.0)
        assert np.allclose(p.grad, [0.6, 0.8])

    def test_no_change_below_threshold(self):
        p = Tensor(np.zeros(2), requires_grad=True)
        p.grad = np.array([0.3, 0.4])
        norm = clip_gradients([p], 1.0)
        assert norm == pytest.approx(0.5)
        assert np.allclose(p.grad, [0.3, 0.4])

    def test_skips_missing_grads(self):
        p = Tensor(np.zeros(2), requires_grad=True)
        assert clip_gradients([p], 1.0) == 0.0


class TestFit:
    def test_zero_epochs_returns_empty_report(self):
        model = QuadraticModel()
        report = fit(
            model, np.zeros((4, 1)), np.zeros((4, 1)),
            OptimizerConfig(kind="sgd", learning_rate=0.1), 0, 2, RngState(0),
        )
        assert report.records == [] and report.final() is None

    def test_convex_problem_converges(self):
        model = QuadraticModel(init=0.0)
        report = fit(
            model, np.zeros((4, 1)), np.zeros((4, 1)),
            OptimizerConfig(kind="sgd", learning_rate=0.2), 30, 4, RngState(1),
        )
        assert abs(float(model.p.data) - 3.0) < 1e-3
        assert report.records[-1].train_loss < report.records[0].train_loss

    def test_deterministic_given_seed(self):
        def run():
            model = MlpModel("mlp_l2", 1, MlpSpec(layer_widths=[8]), RngState(2))
            ds = gen_synthetic("cosexp", 40, rng=RngState(3))
            fit(model, ds.x, ds.y, OptimizerConfig(learning_rate=1e-3), 3, 8, RngState(4))
            return model.predict(np.linspace(-3, 3, 11).reshape(-1, 1))

        assert np.array_equal(run(), run())

    def test_eval_fn_cadence(self):
        calls = []

        def eval_fn(model):
            calls.append(1)
            return (1.0, 2.0)

        model = QuadraticModel()
        report = fit(
            model, np.zeros((2, 1)), np.zeros((2, 1)),
            OptimizerConfig(kind="sgd", learning_rate=0.1), 5, 2, RngState(5),
            eval_fn=eval_fn, eval_every=2,
        )
        # epochs 0, 2, 4 plus the guaranteed final epoch (4 already counted)
        assert len(calls) == 3
        assert report.records[-1].train_metric == 1.0
        assert report.records[1].test_metric == 2.0  # carried over from epoch 0

    def test_validation(self):
        model = QuadraticModel()
        with pytest.raises(ConfigurationError):
            fit(model, np.zeros((0, 1)), np.zeros((0, 1)),
                OptimizerConfig(), 1, 2, RngState(6))
        with pytest.raises(ConfigurationError):
            fit(model, np.zeros((4, 1)), np.zeros((4, 1)),
                OptimizerConfig(), 1, 0, RngState(7))

    def test_minibatches_cover_all_examples(self):
        seen = []

        class SpyModel(QuadraticModel):
            def loss(self, x, y, rng=None):
                seen.extend(x.data[:, 0].tolist())
                return super().loss(x, y, rng)

        x = np.arange(10.0).reshape(-1, 1)
        fit(SpyModel(), x, np.zeros((10, 1)),
            OptimizerConfig(kind="sgd", learning_rate=0.01), 1, 3, RngState(8))
        assert sorted(seen) == list(np.arange(10.0))


class TestEvaluation:
    def test_rmse_vs_reference_zero_for_perfect_model(self):
        class Ref:
            def predict(self, x):
                return np.cos(0.5 * np.pi * x) * np.exp(-((x / 2.0) ** 2))

        rmse = evaluate_rmse_vs_reference(Ref(), "cosexp", (-1.0, 3.0))
        assert rmse == pytest.approx(0.0, abs=1e-12)

    def test_rmse_vs_reference_constant_zero_model(self):
        class Zero:
            def predict(self, x):
                return np.zeros_like(x)

        # RMSE of the zero predictor against the reference on a 1000-point
        # grid, evaluated at 30 digits
        rmse = evaluate_rmse_vs_reference(Zero(), "cosexp", (-3.0, 3.0))
        assert rmse == pytest.approx(0.458173060991772596, abs=1e-12)
        rmse = evaluate_rmse_vs_reference(Zero(), "cosexp", (-1.0, 3.0))
        assert rmse == pytest.approx(0.524170441440287046, abs=1e-12)

    def test_accuracy(self):
        ds = LabeledDataset(
            x=np.eye(3),
            labels=np.array([0, 1, 0]),
            true_labels=np.array([0, 1, 2]),
            num_classes=3,
        )

        class Diag:
            def predict(self, x):
                return x

        assert evaluate_accuracy(Diag(), ds) == pytest.approx(2.0 / 3.0)
        assert evaluate_accuracy(Diag(), ds, use_true_labels=True) == pytest.approx(1.0)

    def test_rmse(self):
        class Const:
            def predict(self, x):
                return np.ones((len(x), 1))

        y = np.zeros((4, 1))
        assert evaluate_rmse(Const(), np.zeros((4, 1)), y) == pytest.approx(1.0)
