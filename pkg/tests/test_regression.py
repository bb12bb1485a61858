import math

import numpy as np
import pytest
from scipy import stats

from intrep.errors import DataError, DomainError
from intrep.numerics import rng_stream
from intrep.regression import (
    ModelId, RegressionData, assess_model, confidence_set_models, cosine_angles, enumerate_models,
    fisher1915_cdf, fisher1915_pdf, gen_regression, gram_cosines, model_u, n_models,
    nullspace_basis, synth_replicates,
)

from conftest import ks_uniform_p


class TestModels:
    def test_count(self):
        assert n_models(15, 5) == 4943 == len(enumerate_models(15, 5))

    def test_order(self):
        ms = enumerate_models(4, 2)
        assert [str(m) for m in ms[:5]] == ["{0}", "{1}", "{2}", "{3}", "{0,1}"]
        assert ModelId((3, 1)).columns == (1, 3)
        with pytest.raises(DomainError):
            ModelId((1, 1))


class TestGeometry:
    def test_nullspace(self):
        X0 = rng_stream(1, 0).std_normal((30, 4))
        V = nullspace_basis(X0)
        assert V.shape == (30, 26)
        np.testing.assert_allclose(V.T @ V, np.eye(26), atol=1e-12)
        np.testing.assert_allclose(V.T @ X0, 0.0, atol=1e-12)

    def test_rank_deficient(self):
        x = rng_stream(1, 0).std_normal((30, 1))
        with pytest.raises(DataError):
            nullspace_basis(np.hstack([x, 2 * x]))

    def test_replicate_moments(self):
        n, d0, k = 23, 3, 4
        X0 = rng_stream(2, 0).std_normal((n, d0))
        V = nullspace_basis(X0)
        a, b = [], []
        for r in range(5000):
            g = rng_stream(3, r)
            Y = X0 @ np.ones(d0) + g.std_normal(n)
            Yt = synth_replicates(Y, k, 1.0, g.substream(0))
            a.append(V.T @ Yt[0])
            b.append(V.T @ Yt[1])
        a, b = np.array(a), np.array(b)
        cross = (a - a.mean(0)).T @ (b - b.mean(0)) / len(a)
        assert np.max(np.abs(cross)) <= 0.25  # entries have scale k = 4; 0.05 relative
        var = np.diag(np.cov(a.T))
        np.testing.assert_allclose(var, k, rtol=0.05 * 2)

    def test_cosines(self):
        e = np.eye(3)
        np.testing.assert_allclose(cosine_angles(e[:2]), [0.0])
        assert cosine_angles(np.vstack([e[0], e[0]]))[0] == pytest.approx(1.0)
        assert cosine_angles(e).size == 3
        with pytest.raises(DomainError):
            cosine_angles(2 * e)


class TestFisher1915:
    def test_examples(self):
        assert fisher1915_cdf(0.0, 10) == pytest.approx(0.5)
        z = np.linspace(-1, 1, 11)
        np.testing.assert_allclose(fisher1915_cdf(z, 3), (z + 1) / 2, atol=1e-14)

    @pytest.mark.parametrize("nu", [3, 4, 10, 97, 500])
    def test_vs_beta_oracle(self, nu):
        z = np.linspace(-0.99, 0.99, 41)
        a = (nu - 1) / 2
        np.testing.assert_allclose(fisher1915_cdf(z, nu), stats.beta.cdf((1 + z) / 2, a, a), atol=1e-12)
        np.testing.assert_allclose(fisher1915_pdf(z, nu), stats.beta.pdf((1 + z) / 2, a, a) / 2, rtol=1e-10)

    def test_random_directions(self):
        g = rng_stream(4, 0).std_normal((20000, 2, 8))
        q = g / np.linalg.norm(g, axis=2, keepdims=True)
        z = np.einsum("ij,ij->i", q[:, 0], q[:, 1])
        assert ks_uniform_p(fisher1915_cdf(z, 8)) > 0.01


class TestModelU:
    def _data(self, n=100, seed=5):
        return gen_regression(n, rng_stream(seed, 0))

    def test_true_model_uniform(self):
        us = []
        for r in range(2000):
            data, true = gen_regression(100, rng_stream(6, r).substream(0))
            us.append(model_u(data, true, 4, rng_stream(6, r).substream(1)).values)
        assert ks_uniform_p(np.concatenate(us)) > 0.01

    def test_edge_nu_three(self):
        r = rng_stream(7, 0)
        n = 8
        X = r.std_normal((n, 5))
        data = RegressionData(X, X @ np.ones(5) + r.std_normal(n), 1.0)
        model = ModelId(tuple(range(5)))
        u = model_u(data, model, 3, rng_stream(7, 1))
        V0 = nullspace_basis(X)
        Yt = synth_replicates(data.Y, 3, 1.0, rng_stream(7, 1))
        P = Yt @ V0
        z = cosine_angles(P / np.linalg.norm(P, axis=1, keepdims=True))
        np.testing.assert_allclose(u.values, (z + 1) / 2, atol=1e-12)

    def test_gram_matches_projection(self):
        data, _ = self._data()
        models = enumerate_models(15, 2)[15:40]
        Yt = synth_replicates(data.Y, 5, 1.0, rng_stream(8, 0))
        z = gram_cosines(data.X, Yt, models)
        for i, m in enumerate(models):
            V0 = nullspace_basis(data.X[:, list(m.columns)])
            P = Yt @ V0
            np.testing.assert_allclose(z[i], cosine_angles(P / np.linalg.norm(P, axis=1, keepdims=True)),
                                       atol=1e-10)

    def test_model_range(self):
        data, _ = self._data()
        with pytest.raises(DomainError):
            model_u(data, ModelId((15,)), 4, rng_stream(1, 0))

    def test_sigma_fallback(self):
        data, true = self._data()
        bare = RegressionData(data.X, data.Y)
        assert 0.7 < bare.residual_sigma() < 1.3
        assert model_u(bare, true, 4, rng_stream(1, 0)).m == 6


class TestConfidenceSet:
    def test_matches_per_model_streams(self):
        data, true = gen_regression(60, rng_stream(9, 0), d=8, s=3, a=2)
        rng = rng_stream(9, 1)
        cs = confidence_set_models(data, 3, 4, 0.05, rng)
        assert cs.n_tested == n_models(8, 3)
        for r in (0, 7, 40, cs.n_tested - 1):
            res = assess_model(data, cs.models[r], 4, 0.05, rng.substream(r))
            assert res.r_u == pytest.approx(cs.r_u[r], rel=1e-10)
            assert res.reject_comp == bool(cs.reject_comp[r])

    def test_accepted_and_rows(self):
        data, true = gen_regression(100, rng_stream(10, 0))
        cs = confidence_set_models(data, 5, 4, 0.05, rng_stream(10, 1))
        assert cs.n_tested == 4943
        assert set(cs.accepted) <= set(cs.accepted_u)
        rows = list(cs.rows())
        assert len(rows) == 4943 and rows[0]["model"] == "{0}"
        p = cs.per_model_p[true]
        assert len(p) == 2

    def test_validation(self):
        data, _ = gen_regression(30, rng_stream(11, 0))
        with pytest.raises(DomainError):
            confidence_set_models(data, 0, 4, 0.05, rng_stream(1, 0))
        with pytest.raises(DomainError):
            confidence_set_models(data, 5, 4, 1.5, rng_stream(1, 0))


class TestGenerator:
    def test_covariance(self):
        data, true = gen_regression(5000, rng_stream(12, 0))
        C = np.corrcoef(data.X.T)
        block = C[:8, :8][~np.eye(8, dtype=bool)]
        rest = C[8:, :][:, :8].ravel()
        assert np.all(np.abs(block - 0.9) <= 0.05)
        assert np.all(np.abs(rest) <= 0.05)
        assert true == ModelId((0, 1, 2, 3, 4))
        coef, *_ = np.linalg.lstsq(data.X, data.Y, rcond=None)
        np.testing.assert_allclose(coef[:5], 1.0, atol=0.15)
