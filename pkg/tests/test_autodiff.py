import numpy as np
import pytest

from choicenet import autodiff as ad
from choicenet.autodiff import RngState, Tape, Tensor, backward, grad_check
from choicenet.errors import ConfigurationError, ContractError, NumericDomainError


def leaf(data):
    return Tensor(np.asarray(data, dtype=float), requires_grad=True)


class TestForwardValues:
    def test_matmul_identity(self):
        a = Tensor(np.arange(9.0).reshape(3, 3))
        out = ad.matmul(Tensor(np.eye(3)), a)
        assert np.allclose(out.data, a.data)

    def test_softmax_symmetry(self):
        assert np.allclose(ad.softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])

    def test_tanh_scalar(self):
        # value pinned from a 30-digit mpmath evaluation
        assert ad.tanh(Tensor([0.5])).data[0] == pytest.approx(0.462117157260009758, abs=1e-12)

    def test_softmax_simplex(self):
        rng = RngState(3)
        for _ in range(20):
            x = rng.standard_normal((4, 7))
            s = ad.softmax(x).data
            assert np.all(s > 0)
            assert np.allclose(s.sum(axis=-1), 1.0, atol=1e-12)

    def test_logsumexp_shift_invariance(self):
        rng = RngState(4)
        x = rng.standard_normal((5, 6))
        base = ad.logsumexp(x).data
        shifted = ad.logsumexp(Tensor(x.data + 123.456)).data
        assert np.allclose(shifted, base + 123.456, atol=1e-10)

    def test_concat_and_slice(self):
        a, b = Tensor([[1.0, 2.0]]), Tensor([[3.0, 4.0]])
        cat = ad.concat([a, b], axis=0)
        assert np.allclose(cat.data, [[1, 2], [3, 4]])
        assert np.allclose(cat[1:, :].data, [[3, 4]])

    def test_shape_mismatch_raises(self):
        with pytest.raises(ConfigurationError):
            ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
        with pytest.raises(ConfigurationError):
            ad.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))

    def test_domain_errors_name_op(self):
        with pytest.raises(NumericDomainError, match="log"):
            ad.log(Tensor([-1.0]))
        with pytest.raises(NumericDomainError, match="div"):
            ad.div(Tensor([1.0]), Tensor([0.0]))
        with pytest.raises(NumericDomainError, match="sqrt"):
            ad.sqrt(Tensor([-0.1]))


class TestBackward:
    def test_sum_gradient_is_ones(self):
        x = leaf(np.arange(6.0).reshape(2, 3))
        with Tape():
            backward(ad.tsum(x))
        assert np.allclose(x.grad, np.ones((2, 3)))

    def test_elementwise_square(self):
        x = leaf([1.0, 2.0])
        with Tape():
            backward(ad.tsum(x * x))
        assert np.allclose(x.grad, [2.0, 4.0])

    def test_grad_accumulates_across_uses(self):
        x = leaf([3.0])
        with Tape():
            backward(ad.tsum(x + x))
        assert np.allclose(x.grad, [2.0])

    def test_non_scalar_loss_rejected(self):
        x = leaf([1.0, 2.0])
        with Tape():
            y = x * x
            with pytest.raises(ContractError):
                backward(y)

    def test_double_backward_rejected(self):
        x = leaf([1.0])
        with Tape():
            loss = ad.tsum(x * x)
            backward(loss)
            with pytest.raises(ContractError):
                backward(loss)

    def test_backward_without_tape_rejected(self):
        x = leaf([1.0])
        loss = ad.tsum(x)
        with pytest.raises(ContractError):
            backward(loss)

    def test_matmul_shape_duality(self):
        rng = RngState(11)
        for m, k, n in [(2, 3, 4), (5, 1, 2), (1, 7, 1)]:
            a = leaf(rng.standard_normal((m, k)).data)
            b = leaf(rng.standard_normal((k, n)).data)
            with Tape():
                backward(ad.tsum(a @ b))
            assert a.grad.shape == a.shape
            assert b.grad.shape == b.shape


def _random_composite(op_seed):
    """A scalar function stressing a mix of primitives."""
    rng = RngState(op_seed)
    w = Tensor(rng.standard_normal((4, 3)).data)

    def fn(t):
        h = ad.tanh(t @ w)
        s = ad.softmax(h)
        lse = ad.logsumexp(h * h + 0.5)
        e = ad.exp(0.1 * h) + ad.sqrt(s + 1.0)
        return ad.tsum(e) + ad.tmean(lse) + ad.tsum(ad.relu(h - 0.2)) + ad.tsum(ad.absolute(h) / (s + 2.0))

    return fn


class TestGradCheck:
    def test_composites_match_finite_differences(self):
        rng = RngState(99)
        for trial in range(100):
            fn = _random_composite(trial)
            point = Tensor(rng.standard_normal((2, 4)).data)
            rep = grad_check(fn, point, step=1e-5, tol=1e-4)
            assert rep.passed, f"trial {trial}: rel err {rep.max_rel_error}"

    def test_constant_function(self):
        rep = grad_check(lambda t: ad.tsum(t * 0.0), Tensor([1.0, -2.0]))
        assert rep.max_rel_error == 0.0

    def test_mlp_l2_loss(self):
        rng = RngState(5)
        w2 = Tensor(rng.standard_normal((5, 1)).data)
        x = Tensor(rng.standard_normal((8, 3)).data)
        y = Tensor(rng.standard_normal((8, 1)).data)

        def fn(w1):
            pred = ad.tanh(x @ w1) @ w2
            return ad.tmean(ad.square(pred - y))

        rep = grad_check(fn, Tensor(rng.standard_normal((3, 5)).data))
        assert rep.passed


class TestSampling:
    def test_moments(self):
        rng = RngState(123)
        s = rng.standard_normal(10**6).data
        assert abs(s.mean()) < 0.005
        assert abs(s.var() - 1.0) < 0.01

    def test_seed_determinism(self):
        a = RngState(77).standard_normal((100,)).data
        b = RngState(77).standard_normal((100,)).data
        assert np.array_equal(a, b)

    def test_distinct_seeds_uncorrelated(self):
        a = RngState(1).standard_normal(10**6).data
        b = RngState(2).standard_normal(10**6).data
        r = np.corrcoef(a, b)[0, 1]
        assert abs(r) < 0.01
