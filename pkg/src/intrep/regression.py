"""Confidence sets of sparse linear models from synthetic sphere replicates.

For a postulated covariate subset ``X0`` (``d0`` columns), the residual
projections ``V0' Y~_j`` of ``k`` synthetic replicates are iid spherical normal
when the model is correct.  Their pairwise cosines then follow a known law
on ``(-1, 1)`` with ``nu = n - d0``, whose CDF turns each cosine into a replicate.

Enumeration draws each model's replicates from substream ``rank`` of the
caller's stream and uses the identity ``<V0'a, V0'b> = a'(I - P0) b``, so a
model costs a few small Gram solves instead of an ``n x n`` factorisation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import AssessmentResult, USample, assess, fisher_pvalues
from .errors import DataError, DomainError
from .numerics import RngStream, reg_inc_beta


@dataclass(frozen=True)
class RegressionData:
    X: np.ndarray
    Y: np.ndarray
    sigma: float | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != Y.size:
            raise DataError("X must be n x d with n = len(Y)")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise DataError("non-finite values in X or Y")
        if self.sigma is not None and not self.sigma > 0:
            raise DataError("sigma must be positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])

    def residual_sigma(self) -> float:
        """Full-model residual standard deviation (needs ``n > d``)."""
        if self.n <= self.d:
            raise DataError("cannot estimate sigma with n <= d")
        coef, *_ = np.linalg.lstsq(self.X, self.Y, rcond=None)
        rss = float(np.sum((self.Y - self.X @ coef) ** 2))
        return math.sqrt(rss / (self.n - self.d))


@dataclass(frozen=True, order=True)
class ModelId:
    columns: tuple[int, ...]

    def __post_init__(self):
        cols = tuple(sorted(int(c) for c in self.columns))
        if len(set(cols)) != len(cols):
            raise DomainError("repeated column index")
        object.__setattr__(self, "columns", cols)

    @property
    def d0(self) -> int:
        return len(self.columns)

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.columns)) + "}"


def enumerate_models(d: int, dmax: int) -> list[ModelId]:
    """All subsets of ``range(d)`` of size 1..dmax, by size then lexicographically."""
    return [ModelId(c) for d0 in range(1, dmax + 1) for c in itertools.combinations(range(d), d0)]


def n_models(d: int, dmax: int) -> int:
    return sum(math.comb(d, k) for k in range(1, dmax + 1))


def nullspace_basis(X0: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of ``col(X0)``, by completing a QR factorisation."""
    X0 = np.asarray(X0, dtype=float)
    if X0.ndim == 1:
        X0 = X0[:, None]
    n, d0 = X0.shape
    if d0 == 0:
        return np.eye(n)
    if d0 >= n:
        raise DomainError("X0 must have fewer columns than rows")
    q, r = np.linalg.qr(X0, mode="complete")
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise DataError("X0 is rank deficient")
    return q[:, d0:]


def synth_replicates(Y: np.ndarray, k: int, sigma: float, rng: RngStream) -> np.ndarray:
    """``k x n`` array with rows ``Y + sqrt(k) sigma (G_j - mean(G))``."""
    if k < 2:
        raise DomainError("k must be at least 2")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    Y = np.asarray(Y, dtype=float).ravel()
    G = rng.std_normal((k, Y.size))
    G -= G.mean(axis=0)
    return Y[None, :] + math.sqrt(k) * sigma * G


def cosine_angles(Qs: np.ndarray) -> np.ndarray:
    """Pairwise inner products of the rows of ``Qs`` in ``(i < j)`` row-major order."""
    Qs = np.asarray(Qs, dtype=float)
    if Qs.ndim != 2 or Qs.shape[0] < 2:
        raise DomainError("need at least two vectors")
    if np.any(np.abs(np.linalg.norm(Qs, axis=1) - 1.0) > 1e-10):
        raise DomainError("vectors must have unit norm")
    i, j = np.triu_indices(Qs.shape[0], 1)
    return np.clip(np.einsum("ij,ij->i", Qs[i], Qs[j]), -1.0, 1.0)


def fisher1915_cdf(z, nu: int):
    """CDF of the cosine between independent uniform directions in ``R^nu``.

    ``1/2 + sign(z)/2 * I_{z^2}(1/2, (nu - 1)/2)``.
    """
    if nu < 3:
        raise DomainError("nu must be at least 3")
    z_arr = np.asarray(z, dtype=float)
    if np.any(np.abs(z_arr) > 1):
        raise DomainError("z must lie in [-1, 1]")
    ib = reg_inc_beta(z_arr * z_arr, 0.5, 0.5 * (nu - 1))
    out = 0.5 + 0.5 * np.sign(z_arr) * ib
    return float(out) if np.ndim(z) == 0 else out


def fisher1915_pdf(z, nu: int):
    """``(1 - z^2)^((nu - 3)/2) / B(1/2, (nu - 1)/2)``."""
    z = np.asarray(z, dtype=float)
    lb = math.lgamma(0.5) + math.lgamma(0.5 * (nu - 1)) - math.lgamma(0.5 * nu)
    return np.exp(0.5 * (nu - 3) * np.log1p(-z * z) - lb)


def _sigma(data: RegressionData, sigma: float | None) -> float:
    if sigma is not None:
        return float(sigma)
    if data.sigma is not None:
        return float(data.sigma)
    return data.residual_sigma()


def model_u(data: RegressionData, model: ModelId, k: int, rng: RngStream,
            sigma: float | None = None) -> USample:
    """Replicates for one model via an explicit null-space basis.

    ``sigma`` falls back to ``data.sigma`` and then to the full-model
    residual estimate.
    """
    _check_model(data, model)
    V0 = nullspace_basis(data.X[:, list(model.columns)])
    Yt = synth_replicates(data.Y, k, _sigma(data, sigma), rng)
    P = Yt @ V0
    Q = P / np.linalg.norm(P, axis=1, keepdims=True)
    z = cosine_angles(Q)
    return USample(fisher1915_cdf(z, data.n - model.d0))


def _check_model(data: RegressionData, model: ModelId) -> None:
    if model.d0 < 1 or model.columns[-1] >= data.d:
        raise DomainError("model columns out of range")
    if data.n - model.d0 < 3:
        raise DomainError("need n - d0 >= 3")


def gram_cosines(X: np.ndarray, Yt: np.ndarray, models: list[ModelId]) -> np.ndarray:
    """Pairwise residual cosines of replicate sets, one set per model (all of size ``d0``).

    ``Yt`` is ``(M, k, n)`` or a shared ``(k, n)``.  Uses ``C - B' A^-1 B``
    with ``A = X0'X0``, ``B = X0'Y~`` and ``C = Y~ Y~'``.
    """
    cols = np.array([m.columns for m in models])
    XtX = X.T @ X
    A = XtX[cols[:, :, None], cols[:, None, :]]
    if Yt.ndim == 2:
        Yt = np.broadcast_to(Yt, (len(models),) + Yt.shape)
    X0t = X.T[cols]                                   # (M, d0, n)
    B = np.matmul(X0t, np.swapaxes(Yt, 1, 2))         # (M, d0, k)
    C = np.matmul(Yt, np.swapaxes(Yt, 1, 2))          # (M, k, k)
    G = C - np.matmul(np.swapaxes(B, 1, 2), np.linalg.solve(A, B))
    dg = np.sqrt(np.einsum("mkk->mk", G))
    i, j = np.triu_indices(Yt.shape[1], 1)
    return np.clip(G[:, i, j] / (dg[:, i] * dg[:, j]), -1.0, 1.0)


@dataclass(frozen=True)
class ModelConfidenceSet:
    """Per-model Fisher p-values with rejection flags for each statistic.

    ``accepted`` lists models rejected by neither statistic; ``accepted_u``
    and ``accepted_comp`` track the two tests separately.
    """

    models: tuple[ModelId, ...]
    r_u: np.ndarray
    r_comp: np.ndarray
    p_u: np.ndarray
    p_comp: np.ndarray
    p_right_u: np.ndarray
    p_right_comp: np.ndarray
    alpha: float
    sides: str

    @property
    def n_tested(self) -> int:
        return len(self.models)

    @property
    def reject_u(self) -> np.ndarray:
        return self.p_u < self.alpha

    @property
    def reject_comp(self) -> np.ndarray:
        return self.p_comp < self.alpha

    @property
    def accepted_u(self) -> list[ModelId]:
        return [m for m, r in zip(self.models, self.reject_u) if not r]

    @property
    def accepted_comp(self) -> list[ModelId]:
        return [m for m, r in zip(self.models, self.reject_comp) if not r]

    @property
    def accepted(self) -> list[ModelId]:
        keep = ~(self.reject_u | self.reject_comp)
        return [m for m, a in zip(self.models, keep) if a]

    @property
    def per_model_p(self) -> dict[ModelId, tuple[float, float]]:
        return {m: (float(a), float(b)) for m, a, b in zip(self.models, self.p_right_u, self.p_right_comp)}

    def index(self, model: ModelId) -> int:
        return self.models.index(model)

    def rows(self) -> Iterator[dict]:
        for i, m in enumerate(self.models):
            yield {
                "model": str(m), "d0": m.d0,
                "r_u": float(self.r_u[i]), "r_comp": float(self.r_comp[i]),
                "p_u": float(self.p_u[i]), "p_comp": float(self.p_comp[i]),
                "reject_u": bool(self.reject_u[i]), "reject_comp": bool(self.reject_comp[i]),
            }


def confidence_set_models(data: RegressionData, dmax: int, k: int, alpha: float,
                          rng: RngStream, sigma: float | None = None,
                          sides: str = "two-sided") -> ModelConfidenceSet:
    """Assess every subset of size ``1..dmax`` and collect the non-rejected ones.

    The model with rank ``r`` in :func:`enumerate_models` order draws its
    replicates from ``rng.substream(r)``, so
    ``model_u(data, model, k, rng.substream(r))`` reproduces its values.
    """
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    if dmax < 1 or dmax > data.d:
        raise DomainError("dmax must lie in [1, d]")
    if dmax >= data.n - 3:
        raise DomainError("dmax must be below n - 3")
    sig = _sigma(data, sigma)
    models = enumerate_models(data.d, dmax)
    n_pairs = k * (k - 1) // 2
    ru = np.empty(len(models))
    rc = np.empty(len(models))
    start = 0
    for d0 in range(1, dmax + 1):
        block = models[start:start + math.comb(data.d, d0)]
        Yt = np.stack([synth_replicates(data.Y, k, sig, rng.substream(start + i))
                       for i in range(len(block))])
        z = gram_cosines(data.X, Yt, block)
        u = np.clip(fisher1915_cdf(z, data.n - d0), 1e-15, 1.0 - 1e-15)
        ru[start:start + len(block)] = -2.0 * np.log(u).sum(axis=1)
        rc[start:start + len(block)] = -2.0 * np.log1p(-u).sum(axis=1)
        start += len(block)
    _, pru, pu = fisher_pvalues(ru, n_pairs, sides)
    _, prc, pc = fisher_pvalues(rc, n_pairs, sides)
    return ModelConfidenceSet(tuple(models), ru, rc, pu, pc, pru, prc, alpha, sides)


def assess_model(data: RegressionData, model: ModelId, k: int, alpha: float, rng: RngStream,
                 sigma: float | None = None, sides: str = "two-sided") -> AssessmentResult:
    return assess(model_u(data, model, k, rng, sigma), alpha, sides)


def gen_regression(n: int, rng: RngStream, d: int = 15, s: int = 5, a: int = 3,
                   rho: float = 0.9, theta_signal: float = 1.0) -> tuple[RegressionData, ModelId]:
    """Design with equicorrelation ``rho`` among the first ``s + a`` columns.

    The first ``s`` columns carry coefficient ``theta_signal``; noise is
    standard normal and ``sigma = 1`` is recorded on the data.
    """
    if s + a > d:
        raise DomainError("s + a must not exceed d")
    cov = np.eye(d)
    cov[: s + a, : s + a] = rho
    np.fill_diagonal(cov, 1.0)
    L = np.linalg.cholesky(cov)
    X = rng.std_normal((n, d)) @ L.T
    theta = np.zeros(d)
    theta[:s] = theta_signal
    Y = X @ theta + rng.std_normal(n)
    return RegressionData(X, Y, 1.0), ModelId(tuple(range(s)))
