import numpy as np
import pytest

from choicenet import autodiff as ad
from choicenet.autodiff import RngState, Tape, Tensor, backward, grad_check
from choicenet.cholesky import (
    cholesky_transform,
    empirical_correlation,
    sample_correlated_weights,
)
from choicenet.errors import DegenerateInputError, NumericDomainError

RHO_GRID = [-0.9, -0.5, 0.0, 0.5, 0.9]


class TestTransformValues:
    def test_rho_zero_returns_z(self):
        rng = RngState(1)
        w = rng.standard_normal(50).data
        z = rng.standard_normal(50).data
        out = cholesky_transform(w, z, 0.0, 2.0, 1.5, 0.7).data
        assert np.allclose(out, z)

    def test_rho_one_returns_mu(self):
        rng = RngState(2)
        w = rng.standard_normal(50).data
        z = rng.standard_normal(50).data
        out = cholesky_transform(w, z, 1.0, 2.0, 1.5, 0.7).data
        assert np.allclose(out, 2.0)

    def test_scalar_oracle(self):
        # 0.6*2 + 0.8*(0.6*1 + 1*0.8) hand computation
        out = cholesky_transform(3.0, 1.0, 0.6, 2.0, 1.0, 1.0).data
        assert out == pytest.approx(2.32, abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(NumericDomainError):
            cholesky_transform(0.0, 0.0, 0.5, 0.0, -1.0, 1.0)
        with pytest.raises(NumericDomainError):
            cholesky_transform(0.0, 0.0, 1.5, 0.0, 1.0, 1.0)

    def test_gradient_wrt_rho(self):
        rng = RngState(3)
        w = Tensor(rng.standard_normal((4, 4)).data + 2.0)
        z = Tensor(rng.standard_normal((4, 4)).data)

        for rho0 in (-0.7, -0.2, 0.3, 0.8):
            def fn(rho, w=w, z=z):
                return ad.tsum(ad.square(cholesky_transform(w, z, rho, 2.0, 1.0, 1.0)))

            rep = grad_check(fn, Tensor(np.array(rho0)))
            assert rep.passed, f"rho={rho0}: rel err {rep.max_rel_error}"


@pytest.fixture(scope="module")
def draws():
    rng = RngState(20240817)
    w = 2.0 + rng.standard_normal(10**6).data  # mu_w=2, sigma_w=1
    z = rng.standard_normal(10**6).data  # sigma_z=1
    return w, z


class TestLemmaStatistics:
    """Monte-Carlo checks of the aux-variable construction and the transform."""

    @pytest.mark.parametrize("rho", RHO_GRID)
    def test_aux_variable_moments_and_corr(self, draws, rho):
        w, z = draws
        z_tilde = rho * (w - 2.0) + np.sqrt(1 - rho**2) * z
        assert abs(z_tilde.mean()) < 0.01
        assert abs(z_tilde.var() - 1.0) < 0.02
        assert abs(empirical_correlation(w, z_tilde) - rho) < 0.01

    @pytest.mark.parametrize("rho", RHO_GRID)
    def test_transform_moments_and_corr(self, draws, rho):
        w, z = draws
        wt = cholesky_transform(w, z, rho, 2.0, 1.0, 1.0).data
        assert abs(wt.mean() - rho * 2.0) < 0.01
        expected_var = 1.0 - rho**2
        assert abs(wt.var() - expected_var) < 0.02 * max(expected_var, 0.5)
        if expected_var > 0:
            assert abs(empirical_correlation(w, wt) - rho) < 0.01

    def test_variance_shrinks_toward_unit_rho(self, draws):
        w, z = draws
        w, z = w[:200_000], z[:200_000]
        variances = [
            cholesky_transform(w, z, r, 2.0, 1.0, 1.0).data.var()
            for r in [0.0, 0.3, 0.6, 0.9, 0.99]
        ]
        assert all(a > b for a, b in zip(variances, variances[1:]))


class TestSampleCorrelatedWeights:
    def test_k1_is_exactly_mu(self):
        mu = np.full((3, 2), 2.0)
        out = sample_correlated_weights(mu, np.ones((3, 2)), np.ones((3, 2)), [1.0], RngState(5))
        assert np.array_equal(out.tilde[0].data, mu)

    def test_rho_zero_component_is_aux_draw(self):
        mu = np.full((3, 2), 2.0)
        out = sample_correlated_weights(
            mu, np.ones((3, 2)), np.ones((3, 2)), [1.0, 0.0], RngState(6)
        )
        assert np.allclose(out.tilde[1].data, out.aux_sample.data)

    def test_elementwise_statistics_at_half(self):
        # E = rho*mu = 1.0, Var = (1-rho^2)*sigma_z^2 = 0.75 at rho=0.5, mu=2
        n = 10**6
        out = sample_correlated_weights(
            np.full((n,), 2.0),
            np.ones(n),
            np.ones(n),
            [1.0, 0.5],
            RngState(7),
        )
        t = out.tilde[1].data
        assert abs(t.mean() - 1.0) < 0.01
        assert abs(t.var() - 0.75) < 0.02

    def test_negative_correlation_recovered(self):
        n = 10**6
        out = sample_correlated_weights(
            np.full((n,), 2.0), np.ones(n), np.ones(n), [1.0, -0.7], RngState(8)
        )
        r = empirical_correlation(out.base_sample.data, out.tilde[1].data)
        assert abs(r - (-0.7)) < 0.01

    def test_sigma_domain_error(self):
        with pytest.raises(NumericDomainError):
            sample_correlated_weights(
                np.zeros((2, 2)), np.zeros((2, 2)), np.ones((2, 2)), [1.0], RngState(9)
            )

    def test_gradients_flow_via_reparametrization(self):
        def fn(mu):
            out = sample_correlated_weights(
                mu, Tensor(np.full((2, 2), 0.5)), Tensor(np.full((2, 2), 0.5)), [1.0, 0.4], RngState(10)
            )
            return ad.tsum(ad.square(out.tilde[1]))

        rep = grad_check(fn, Tensor(np.full((2, 2), 1.5)))
        assert rep.passed


class TestEmpiricalCorrelation:
    def test_self_correlation(self):
        xs = np.arange(10.0)
        assert empirical_correlation(xs, xs) == pytest.approx(1.0)
        assert empirical_correlation(xs, -xs) == pytest.approx(-1.0)

    def test_zero_variance_rejected(self):
        with pytest.raises(DegenerateInputError):
            empirical_correlation(np.ones(10), np.arange(10.0))

    def test_short_input_rejected(self):
        with pytest.raises(DegenerateInputError):
            empirical_correlation([1.0], [2.0])
