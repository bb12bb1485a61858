import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from intrep.errors import DomainError
from intrep.power import (
    ThetaFamily, additive_cdf, additive_ER, heatmap_grid, markov_bound, moments_from_cdf,
    normal_power, para_moments, plugin_limit, solve_intersection_x, weibull_u_cdf,
)

FIG_SIGMA = [0.5, 0.625, 0.75, 0.875, 1.0, 1.25, 1.5, 1.75, 2.0]
FIG_PSI = [0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0]
MARKOV_GRID = [(m, th) for m in (10, 50) for th in (0.1, 0.3, 0.5, 0.7)]


def mc_rejection(m, theta, alpha, reps=20000, seed=0):
    # -log U ~ Exp(rate 1 - theta) under F(u) = u**(1 - theta)
    g = np.random.default_rng(seed)
    R = 2.0 * g.exponential(1.0 / (1.0 - theta), size=(reps, m)).sum(axis=1)
    return float(np.mean(R >= stats.chi2.ppf(1 - alpha, 2 * m)))


class TestMoments:
    def test_uniform(self):
        e, v = moments_from_cdf(lambda u: u)
        assert e == pytest.approx(1.0, abs=1e-8) and v == pytest.approx(1.0, abs=1e-8)

    def test_theta_half(self):
        e, v = moments_from_cdf(lambda u: u**0.5)
        assert e == pytest.approx(2.0, abs=1e-7) and v == pytest.approx(4.0, abs=1e-7)

    def test_vs_scipy_quad(self):
        F = lambda u: weibull_u_cdf(u, 0.7, 1.5, 1.2)
        e_ref = integrate.quad(lambda u: F(u) / u, 0, 1, limit=200)[0]
        s_ref = integrate.quad(lambda u: -2 * math.log(u) * F(u) / u, 0, 1, limit=200)[0]
        e, v = moments_from_cdf(F)
        assert e == pytest.approx(e_ref, rel=1e-7)
        assert v == pytest.approx(s_ref - e_ref**2, rel=1e-6)

    def test_para(self):
        for m in (1, 7, 100):
            assert para_moments(ThetaFamily(np.zeros(m))) == (2.0 * m, 4.0 * m)
        assert para_moments(ThetaFamily([0.5])) == (4.0, 16.0)

    @given(st.lists(st.floats(0.0, 0.9), min_size=1, max_size=5))
    @settings(max_examples=20, deadline=None)
    def test_para_vs_quadrature(self, thetas):
        fam = ThetaFamily(thetas)
        e = sum(2 * moments_from_cdf(fam.cdf(j))[0] for j in range(fam.m))
        v = sum(4 * moments_from_cdf(fam.cdf(j))[1] for j in range(fam.m))
        E, V = para_moments(fam)
        assert e == pytest.approx(E, rel=1e-6) and v == pytest.approx(V, rel=1e-6)

    def test_family_domain(self):
        with pytest.raises(DomainError):
            ThetaFamily([1.0])
        with pytest.raises(DomainError):
            ThetaFamily([])


class TestMarkov:
    def test_strong(self):
        assert markov_bound(ThetaFamily(np.full(50, 0.5)), 0.05) >= 0.9

    def test_uninformative_at_null(self):
        assert markov_bound(ThetaFamily(np.full(20, 1e-9)), 0.05) == 0.0

    @pytest.mark.parametrize("m,theta", MARKOV_GRID)
    def test_below_monte_carlo(self, m, theta):
        assert markov_bound(ThetaFamily(np.full(m, theta)), 0.05) <= mc_rejection(m, theta, 0.05)

    def test_monotone(self):
        base = np.full(30, 0.3)
        b0 = markov_bound(ThetaFamily(base), 0.05)
        for j in (0, 10, 29):
            t = base.copy()
            t[j] = 0.6
            assert markov_bound(ThetaFamily(t), 0.05) >= b0 - 1e-12


class TestNormalPower:
    @pytest.mark.parametrize("m", [1, 5, 100, 10000])
    @pytest.mark.parametrize("alpha", [0.01, 0.05, 0.2])
    def test_null_exact(self, m, alpha):
        assert abs(normal_power(m, math.sqrt(m), m, alpha) - alpha) <= 1e-12

    def test_dominant_mean(self):
        assert normal_power(200, 10, 100, 0.05) == pytest.approx(1.0, abs=1e-12)

    def test_vs_monte_carlo(self):
        m, th = 100, 0.3
        mu, tau = m / (1 - th), math.sqrt(m) / (1 - th)
        assert abs(normal_power(mu, tau, m, 0.05) - mc_rejection(m, th, 0.05)) <= 0.05

    def test_domain(self):
        with pytest.raises(DomainError):
            normal_power(1.0, 0.0, 1, 0.05)


class TestMisspecification:
    def test_weibull_examples(self):
        u = np.linspace(0, 1, 11)
        np.testing.assert_allclose(weibull_u_cdf(u, 1.0, 2.0, 2.0), u, atol=1e-15)
        assert weibull_u_cdf(0.5, 2.0, 1.0, 1.0) == 0.5
        with pytest.raises(DomainError):
            weibull_u_cdf(0.5, 0.0, 1.0, 1.0)

    def test_mean_decreasing_in_psi0(self):
        es = [moments_from_cdf(lambda u, p=p: weibull_u_cdf(u, 1.0, 1.0, p))[0] for p in (0.5, 0.8, 1.0, 1.3, 2.0)]
        assert es[2] == pytest.approx(1.0, abs=1e-8)
        assert all(a > b for a, b in zip(es, es[1:]))

    def test_additive(self):
        assert additive_ER(1.0, 0.0, 1.0) == 1.0
        assert additive_ER(1.0, math.e - 1.0, 1.0) == pytest.approx(math.e / (math.e - 1.0), rel=1e-14)
        for g, d, p in [(1.0, 1.0, 1.0), (2.0, -0.5, 0.7), (0.5, 3.0, 2.0)]:
            e, _ = moments_from_cdf(lambda u: additive_cdf(u, g, d, p))
            assert e == pytest.approx(additive_ER(g, d, p), abs=1e-8)
        with pytest.raises(DomainError):
            additive_ER(1.0, -2.0, 1.0)

    def test_additive_small_eta_branch(self):
        e = 1e-7
        assert additive_ER(1.0, e, 1.0) == pytest.approx((1 + e) * math.log1p(e) / e, rel=1e-12)


class TestHeatmap:
    def test_null_cell(self):
        g = heatmap_grid([1.0], [1.0])
        assert abs(g.logE[0, 0]) <= 1e-6 and abs(g.logV[0, 0]) <= 1e-6

    def test_contour_at_unit_shape(self):
        g = heatmap_grid(FIG_SIGMA, FIG_PSI)
        i = FIG_SIGMA.index(1.0)
        assert np.all(np.abs(g.logE[i]) <= 1e-6)
        assert np.all(g.logE[0] > 0)
        assert g.logE.shape == (len(FIG_SIGMA), len(FIG_PSI))
        assert len(list(g.rows())) == g.logE.size

    def test_plugin_closed_form(self):
        for s, p in [(2.0, 3.0), (0.5, 1.5), (1.0, 0.7), (1.5, 0.4)]:
            assert plugin_limit(s, p) == pytest.approx(p ** (1.0 / s), rel=1e-8)

    def test_exact_rule_depends_on_shape_only(self):
        g = heatmap_grid([0.5, 2.0], [0.5, 1.0, 3.0], "exact")
        np.testing.assert_allclose(g.logE, g.logE[:, :1] * np.ones((1, 3)), atol=1e-7)

    def test_bad_rule(self):
        with pytest.raises(DomainError):
            heatmap_grid([1.0], [1.0], "cubic")


class TestIntersection:
    def test_zero(self):
        assert solve_intersection_x(0.0) == 1.0

    @pytest.mark.parametrize("eps", [-0.2, -0.05, 0.01, 0.1, 0.3])
    def test_root(self, eps):
        x = solve_intersection_x(eps)
        assert (x - 1) ** 2 == pytest.approx(2 * (1 + eps) * x * (math.log(x) + 1 / x - 1), rel=1e-9)
        assert abs(x - 1) > 1e-6 and np.sign(x - 1) == np.sign(eps)

    def test_domain(self):
        with pytest.raises(DomainError):
            solve_intersection_x(0.7)
