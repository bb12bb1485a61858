"""Cox proportional hazards: partial likelihood, Newton fit, block-score replicates.

The sample is split at random into ``m`` blocks.  Each block's partial
likelihood score at the full-sample estimate, standardised by its own observed
information, is approximately standard normal when the model holds.  Blocks
use their own risk sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AssessmentResult, USample, assess
from .errors import ConvergenceError, DataError, DomainError
from .numerics import RngStream, chi2_cdf, normal_cdf


@dataclass(frozen=True)
class SurvData:
    """Observed times ``y``, event indicators ``d`` and an ``n x p`` covariate matrix."""

    y: np.ndarray
    d: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        d = np.asarray(self.d).ravel()
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if not (y.size == d.size == x.shape[0]) or y.size == 0:
            raise DataError("y, d and x must describe the same nonempty set of records")
        if not np.all(np.isfinite(y)) or np.any(y <= 0):
            raise DataError("observed times must be positive and finite")
        if not np.all(np.isin(d, (0, 1))):
            raise DataError("event indicators must be 0 or 1")
        if not np.all(np.isfinite(x)):
            raise DataError("covariates must be finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "d", d.astype(np.int8))
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def p(self) -> int:
        return int(self.x.shape[1])

    @property
    def n_events(self) -> int:
        return int(self.d.sum())

    def subset(self, idx) -> "SurvData":
        return SurvData(self.y[idx], self.d[idx], self.x[idx])


@dataclass(frozen=True)
class PHFit:
    beta_hat: np.ndarray
    loglik: float
    observed_info: np.ndarray
    iterations: int

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(np.linalg.inv(self.observed_info)))


def partial_loglik(data: SurvData, beta) -> tuple[float, np.ndarray, np.ndarray]:
    """Log partial likelihood with its gradient and negative Hessian.

    Risk sets are ``{i : y_i >= y_event}``, so censored records tied with an
    event time stay at risk.  Tied event times raise :class:`DataError`.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.size != data.p:
        raise DomainError(f"beta has length {beta.size}, expected {data.p}")
    ev_times = data.y[data.d == 1]
    if ev_times.size != np.unique(ev_times).size:
        raise DataError("tied event times are not supported")
    order = np.argsort(-data.y, kind="stable")
    y = data.y[order]
    d = data.d[order]
    x = data.x[order]
    eta = x @ beta
    # running log-sum-exp keeps every risk-set total representable
    log_s0 = np.logaddexp.accumulate(eta)
    p = x.shape[1]
    xx = (x[:, :, None] * x[:, None, :]).reshape(len(y), p * p)
    # last position whose time is >= y[i]: the end of i's tie group
    last = np.searchsorted(-y, -y, side="right") - 1
    ev = np.flatnonzero(d == 1)
    r = last[ev]
    xbar = _risk_mean(eta, x, log_s0)[r]
    x2bar = _risk_mean(eta, xx, log_s0)[r].reshape(-1, p, p)
    loglik = float(np.sum(eta[ev] - log_s0[r]))
    score = np.sum(x[ev] - xbar, axis=0)
    info = np.sum(x2bar - xbar[:, :, None] * xbar[:, None, :], axis=0)
    return loglik, score, info


def _risk_mean(eta, v, log_s0):
    """Running weighted means ``sum_{j<=k} e^eta_j v_j / sum_{j<=k} e^eta_j``.

    Positive and negative parts are accumulated separately in log space.
    """
    out = np.zeros(v.shape)
    with np.errstate(divide="ignore"):
        for part, sign in ((np.maximum(v, 0.0), 1.0), (np.maximum(-v, 0.0), -1.0)):
            lp = np.logaddexp.accumulate(eta[:, None] + np.log(part), axis=0)
            out += sign * np.exp(lp - log_s0[:, None])
    return out


def ph_mle(data: SurvData, max_iter: int = 100, beta_limit: float = 50.0) -> PHFit:
    """Newton-Raphson from zero with step halving."""
    p = data.p
    if data.n_events < p + 1:
        raise DataError(f"need at least {p + 1} events, got {data.n_events}")
    tol = 1e-8 * data.n
    beta = np.zeros(p)
    ll, score, info = partial_loglik(data, beta)
    info0 = info
    for it in range(1, max_iter + 1):
        if np.linalg.norm(score) <= tol:
            return _checked(PHFit(beta, ll, info, it - 1), info0)
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError as exc:
            raise DataError("information matrix is singular (collinear covariates)") from exc
        for _ in range(60):
            cand = beta + step
            ll_new, score_new, info_new = partial_loglik(data, cand)
            if ll_new >= ll - 1e-12 * abs(ll):
                break
            step = step / 2.0
        else:
            raise ConvergenceError("step halving failed to increase the partial likelihood")
        beta, ll, score, info = cand, ll_new, score_new, info_new
        if np.max(np.abs(beta)) > beta_limit:
            raise ConvergenceError("coefficients diverge: monotone likelihood (separation)")
    if np.linalg.norm(score) <= tol:
        return _checked(PHFit(beta, ll, info, max_iter), info0)
    raise ConvergenceError(f"Newton iteration did not converge in {max_iter} steps")


def _checked(fit: PHFit, info0: np.ndarray) -> PHFit:
    # a flat score far out with vanishing information means the likelihood
    # keeps rising towards infinity rather than having a maximum
    if np.any(np.diag(fit.observed_info) < 1e-6 * np.diag(info0)):
        raise ConvergenceError("coefficients diverge: monotone likelihood (separation)")
    return fit


def block_indices(n: int, m_blocks: int, rng: RngStream) -> list[np.ndarray]:
    """Random partition of ``range(n)`` into blocks whose sizes differ by at most one."""
    if m_blocks < 2:
        raise DomainError("need at least two blocks")
    if m_blocks > n:
        raise DomainError("more blocks than records")
    return np.array_split(rng.permutation(n), m_blocks)


def block_u(data: SurvData, beta, m_blocks: int, rng: RngStream) -> USample:
    """Score PIT per block: ``Phi(S / sqrt(I))`` for one covariate, else ``G_p(S' I^-1 S)``."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    p = data.p
    vals = np.empty(m_blocks)
    for j, idx in enumerate(block_indices(data.n, m_blocks, rng)):
        blk = data.subset(idx)
        if blk.n_events < p + 1:
            raise DataError(f"block {j} has {blk.n_events} events, need {p + 1}")
        _, s, info = partial_loglik(blk, beta)
        if p == 1:
            if not info[0, 0] > 0:
                raise DataError(f"block {j} has zero information")
            vals[j] = normal_cdf(s[0] / math.sqrt(info[0, 0]))
        else:
            try:
                q = float(s @ np.linalg.solve(info, s))
            except np.linalg.LinAlgError as exc:
                raise DataError(f"block {j} information is singular") from exc
            vals[j] = chi2_cdf(max(q, 0.0), p)
    tag = float(beta[0]) if p == 1 else None
    return USample(vals, tag)


def assess_ph(data: SurvData, m_blocks: int, alpha: float, rng: RngStream,
              beta=None, sides: str = "two-sided") -> AssessmentResult:
    """Fit on the full sample (unless ``beta`` is given), then test the block scores."""
    if beta is None:
        beta = ph_mle(data).beta_hat
    return assess(block_u(data, beta, m_blocks, rng), alpha, sides)


# ---------------------------------------------------------------------------
# generators


def gen_ph_data(n: int, beta, rng: RngStream, shape: float = 1.0, scale: float = 1.0,
                censor_rate: float = 0.0, admin_time: float = math.inf) -> SurvData:
    """Weibull-baseline PH data with ``x ~ N(0, I_p)``.

    Cumulative hazard ``(t / scale)**shape * exp(x' beta)``.  Exponential
    censoring at ``censor_rate`` (0 disables it) and administrative censoring
    at ``admin_time``.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    x = rng.std_normal((n, beta.size))
    e = rng.unit_exponential(n)
    t = scale * (e * np.exp(-(x @ beta))) ** (1.0 / shape)
    return _censor(t, x, rng, censor_rate, admin_time)


def gen_tv_data(n: int, rng: RngStream, b0: float = 1.0, b1: float = 1.0,
                censor_rate: float = 0.0, admin_time: float = 10.0) -> SurvData:
    """Unit baseline hazard with a time-varying effect ``beta(t) = b0 + b1 t``.

    The cumulative hazard ``exp(b0 x) expm1(b1 x t) / (b1 x)`` is inverted in
    closed form; individuals whose total hazard never reaches their draw are
    censored at ``admin_time``.
    """
    x = rng.std_normal((n, 1))
    e = rng.unit_exponential(n)
    c = x[:, 0] * b1
    arg = e * np.exp(-b0 * x[:, 0])
    with np.errstate(invalid="ignore", divide="ignore"):
        inner = 1.0 + c * arg
        t = np.where(np.abs(c) < 1e-12, arg, np.log(np.where(inner > 0, inner, 1.0)) / c)
        t = np.where((np.abs(c) >= 1e-12) & (inner <= 0), np.inf, t)
    return _censor(t, x, rng, censor_rate, admin_time)


def _censor(t, x, rng: RngStream, censor_rate: float, admin_time: float) -> SurvData:
    n = t.size
    c = np.full(n, admin_time)
    if censor_rate > 0:
        c = np.minimum(c, rng.unit_exponential(n) / censor_rate)
    y = np.minimum(t, c)
    d = (t <= c).astype(int)
    return SurvData(y, d, x)
