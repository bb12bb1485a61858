import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize, stats

from intrep.errors import DataError, DomainError
from intrep.numerics import rng_stream
from intrep.pairs import (
    PairData, PairGenSpec, add_loglik, add_mle, add_score, add_u, assess_pairs, gen_pairs,
    mult_mle, mult_observed_info, mult_u,
)

from conftest import ks_uniform_p


def _pairs(kind, eff, m, shape=1.0, seed=0, **kw):
    return gen_pairs(PairGenSpec(kind, eff, m, shape, **kw), rng_stream(seed, 0))


class TestData:
    def test_validation(self):
        with pytest.raises(DataError):
            PairData(np.array([1.0, -1.0]), np.array([1.0, 1.0]))
        with pytest.raises(DataError):
            PairData(np.array([1.0]), np.array([1.0, 2.0]))

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            PairGenSpec("multiplicative", -1.0, 10)
        with pytest.raises(DomainError):
            PairGenSpec("additive", -2.0, 10)
        with pytest.raises(DomainError):
            PairGenSpec("additive", 0.0, 10, shape=0.0)


class TestGenerator:
    def test_exponential_ratio_is_f22(self):
        p = _pairs("multiplicative", 1.0, 5000, seed=1)
        assert stats.kstest(p.z, stats.f(2, 2).cdf).pvalue > 0.01

    def test_additive_zero_same_null(self):
        p = _pairs("additive", 0.0, 5000, seed=2)
        assert stats.kstest(p.z, stats.f(2, 2).cdf).pvalue > 0.01

    @pytest.mark.parametrize("param", ["scale", "rate"])
    def test_weibull_ratio_law(self, param):
        p = _pairs("multiplicative", 1.0, 5000, shape=2.0, seed=3, parametrization=param)
        assert stats.kstest(p.z, lambda z: z**2 / (1 + z**2)).pvalue > 0.01

    def test_scale_convention_ratio(self):
        # scale form: Z = (E1/E0)**(1/s) / psi, so psi**s Z**s is F(2, 2)
        psi, s = 2.0, 0.5
        p = _pairs("multiplicative", psi, 5000, shape=s, seed=4)
        assert stats.kstest((psi * p.z) ** s, stats.f(2, 2).cdf).pvalue > 0.01

    def test_rate_convention_ratio(self):
        psi, s = 2.0, 0.5
        p = _pairs("multiplicative", psi, 5000, shape=s, seed=5, parametrization="rate")
        assert stats.kstest(psi * p.z**s, stats.f(2, 2).cdf).pvalue > 0.01

    def test_reproducible(self):
        a = _pairs("additive", 1.0, 20, seed=9)
        b = _pairs("additive", 1.0, 20, seed=9)
        np.testing.assert_array_equal(a.y1, b.y1)


class TestMultiplicative:
    def test_examples(self):
        one = PairData(np.array([1.0]), np.array([1.0]))
        assert mult_u(one, 1.0).values[0] == pytest.approx(0.5)
        assert mult_u(one, 3.0).values[0] == pytest.approx(0.75)
        assert mult_mle(one) == pytest.approx(1.0, abs=1e-10)

    def test_null_uniform(self):
        p = _pairs("multiplicative", 1.7, 5000, seed=11)
        assert ks_uniform_p(mult_u(p, 1.7).values) > 0.01

    def test_consistency(self):
        p = _pairs("multiplicative", 2.0, 100_000, seed=12)
        assert mult_mle(p) == pytest.approx(2.0, abs=0.03)

    def test_mle_vs_scipy_optimizer(self):
        p = _pairs("multiplicative", 0.6, 300, seed=13)
        nll = lambda t: -np.sum(t - 2 * np.log1p(np.exp(t) * p.z))
        t = optimize.minimize_scalar(nll, bounds=(-10, 10), method="bounded",
                                     options={"xatol": 1e-12}).x
        assert mult_mle(p) == pytest.approx(np.exp(t), rel=1e-7)

    def test_replicates_sum_to_half(self):
        p = _pairs("additive", 1.0, 200, shape=2.0, seed=14)
        assert mult_u(p, mult_mle(p)).values.sum() == pytest.approx(100.0, abs=1e-9)

    def test_observed_info_finite_difference(self):
        p = _pairs("multiplicative", 1.3, 50, seed=15)
        ll = lambda psi: np.sum(np.log(psi) - 2 * np.log1p(psi * p.z))
        psi, h = 1.1, 1e-4
        fd = -(ll(psi + h) - 2 * ll(psi) + ll(psi - h)) / h**2
        assert mult_observed_info(p, psi) == pytest.approx(fd, rel=1e-5)

    def test_swap_equivariance(self):
        p = _pairs("multiplicative", 2.5, 100, seed=16)
        assert mult_mle(p.swapped()) == pytest.approx(1.0 / mult_mle(p), rel=1e-9)


class TestAdditive:
    def test_examples(self):
        assert add_u(PairData(np.array([1.0]), np.array([3.0])), 0.0).values[0] == pytest.approx(0.25)
        top = PairData(np.array([2.0]), np.array([1e-300]))
        assert add_u(top, 0.7).values[0] == pytest.approx(1.0)
        assert add_u(top, -0.7).values[0] == pytest.approx(1.0)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(1e-3, 50), st.floats(1e-3, 50), st.floats(-30, 30))
    def test_continuity_and_range(self, y1, y0, d):
        p = PairData(np.array([y1]), np.array([y0]))
        u = add_u(p, d).values[0]
        assert 0.0 <= u <= 1.0
        # decreasing in delta: larger effect, shorter treated time expected
        assert add_u(p, d + 0.5).values[0] >= u - 1e-12
        near0 = add_u(p, 1e-12).values[0]
        assert near0 == pytest.approx(y1 / (y1 + y0), abs=1e-9)

    def test_null_uniform(self):
        p = _pairs("additive", 0.5, 5000, seed=21)
        assert ks_uniform_p(add_u(p, 0.5).values) > 0.01

    def test_score_is_loglik_derivative(self):
        p = _pairs("additive", 0.8, 80, seed=22)
        for d in (-0.5, 1e-9, 0.3, 2.0):
            h = 1e-5
            fd = (add_loglik(p, d + h) - add_loglik(p, d - h)) / (2 * h)
            assert add_score(p, d) == pytest.approx(fd, rel=1e-6, abs=1e-6)

    def test_loglik_against_direct_density(self):
        p = _pairs("additive", 0.8, 30, seed=23)
        d = 0.9
        direct = np.sum(np.log(d) - d * p.y1 - np.log1p(-np.exp(-d * p.s)))
        assert add_loglik(p, d) == pytest.approx(direct, rel=1e-12)

    def test_consistency_null(self):
        assert add_mle(_pairs("additive", 0.0, 10_000, seed=24)) == pytest.approx(0.0, abs=0.05)

    def test_consistency_alternative(self):
        assert add_mle(_pairs("additive", 1.0, 10_000, seed=25)) == pytest.approx(1.0, abs=0.1)

    def test_needs_two_pairs(self):
        with pytest.raises(DomainError):
            add_mle(PairData(np.array([1.0]), np.array([2.0])))


class TestAssess:
    def test_postulated_validation(self):
        with pytest.raises(DomainError):
            assess_pairs(_pairs("additive", 0.0, 10), "quadratic", 0.05)

    def test_strong_departure_rejected(self):
        res = assess_pairs(_pairs("additive", 0.0, 400, shape=0.5, seed=31), "multiplicative", 0.05)
        assert res.rejected

    def test_null_calibration(self):
        rej = np.zeros(2)
        for r in range(300):
            p = gen_pairs(PairGenSpec("multiplicative", 1.0, 100), rng_stream(41, r))
            res = assess_pairs(p, "multiplicative", 0.05)
            rej += [res.reject_u, res.reject_comp]
        # plug-in estimation makes the test conservative
        assert np.all(rej / 300 <= 0.05)
