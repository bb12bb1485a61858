"""Inhomogeneous Poisson processes on ``(0, t0]`` with intensity ``exp(gamma_i + beta t)``.

Given its event count ``m_i``, an individual's event times are iid with density
``beta exp(beta t) / (exp(beta t0) - 1)``, free of ``gamma_i``.  The replicate for
individual ``i`` is the conditional CDF of the sum of its event times given
``m_i``, evaluated at the observed sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import AssessmentResult, USample, assess
from .errors import BracketError, ConvergenceError, DataError, DomainError, PrecisionLossError
from .numerics import RngStream, find_root_bracketed, normal_cdf, reg_lower_gamma

CANCELLATION_LIMIT = 1e12


@dataclass(frozen=True)
class EventHistory:
    times: np.ndarray
    t0: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        if not self.t0 > 0:
            raise DataError("t0 must be positive")
        if t.size and (np.any(t <= 0) or np.any(t > self.t0) or np.any(np.diff(t) <= 0)):
            raise DataError("event times must be strictly increasing in (0, t0]")
        object.__setattr__(self, "times", t)

    @property
    def m(self) -> int:
        return int(self.times.size)


@dataclass(frozen=True)
class CohortData:
    histories: tuple[EventHistory, ...]
    t0: float = field(init=False)

    def __post_init__(self):
        hs = tuple(self.histories)
        if not hs:
            raise DataError("cohort has no individuals")
        t0 = hs[0].t0
        if any(h.t0 != t0 for h in hs):
            raise DataError("all histories must share t0")
        object.__setattr__(self, "histories", hs)
        object.__setattr__(self, "t0", t0)

    @property
    def n(self) -> int:
        return len(self.histories)

    @property
    def counts(self) -> np.ndarray:
        return np.array([h.m for h in self.histories])

    @property
    def sums(self) -> np.ndarray:
        return np.array([h.times.sum() for h in self.histories])

    @classmethod
    def from_times(cls, times: Sequence[Sequence[float]], t0: float) -> "CohortData":
        return cls(tuple(EventHistory(np.sort(np.asarray(t, dtype=float)), t0) for t in times))


# ---------------------------------------------------------------------------
# simulation by time rescaling


def _unit_arrivals(rng: RngStream, horizon: float) -> np.ndarray:
    """Arrival times of a rate-1 process on ``[0, horizon)``, drawn in chunks."""
    chunk = max(16, int(math.ceil(horizon + 5.0 * math.sqrt(horizon) + 10.0)))
    arrivals = np.cumsum(rng.unit_exponential(chunk))
    while arrivals[-1] < horizon:
        more = arrivals[-1] + np.cumsum(rng.unit_exponential(chunk))
        arrivals = np.concatenate([arrivals, more])
    return arrivals[arrivals < horizon]


def simulate_loglinear(gamma_i: float, beta: float, t0: float, rng: RngStream) -> EventHistory:
    """Invert ``tau(t) = exp(gamma) (exp(beta t) - 1) / beta`` at unit-exponential arrivals."""
    if not t0 > 0:
        raise DomainError("t0 must be positive")
    if beta == 0.0:
        horizon = math.exp(gamma_i) * t0
        c = _unit_arrivals(rng, horizon)
        t = c * math.exp(-gamma_i)
    else:
        horizon = math.exp(gamma_i) * math.expm1(beta * t0) / beta
        c = _unit_arrivals(rng, horizon)
        t = np.log1p(beta * c * math.exp(-gamma_i)) / beta
    return EventHistory(np.minimum(t, t0), t0)


def simulate_powerlaw(gamma_i: float, rho: float, t0: float, rng: RngStream) -> EventHistory:
    """Intensity ``exp(gamma) t**rho``; inverts ``tau(t) = exp(gamma) t**(rho+1) / (rho+1)``."""
    if not rho > -1:
        raise DomainError("rho must exceed -1")
    if not t0 > 0:
        raise DomainError("t0 must be positive")
    k = rho + 1.0
    horizon = math.exp(gamma_i) * t0**k / k
    c = _unit_arrivals(rng, horizon)
    t = (k * c * math.exp(-gamma_i)) ** (1.0 / k)
    return EventHistory(np.minimum(t, t0), t0)


def simulate_cohort(n: int, t0: float, rng: RngStream, beta: float | None = None,
                    rho: float | None = None, gammas: np.ndarray | None = None) -> CohortData:
    """``n`` individuals with standard-normal ``gamma_i`` unless given.

    Exactly one of ``beta`` (log-linear truth) or ``rho`` (power-law truth)
    must be set.  Individual ``i`` draws its events from substream ``i``.
    """
    if (beta is None) == (rho is None):
        raise DomainError("give exactly one of beta or rho")
    if gammas is None:
        gammas = rng.std_normal(n)
    hs = []
    for i in range(n):
        sub = rng.substream(i)
        if beta is not None:
            hs.append(simulate_loglinear(float(gammas[i]), beta, t0, sub))
        else:
            hs.append(simulate_powerlaw(float(gammas[i]), rho, t0, sub))
    return CohortData(tuple(hs))


# ---------------------------------------------------------------------------
# single-event law


def event_cdf(t, beta: float, t0: float):
    """``expm1(beta t) / expm1(beta t0)``, or ``t / t0`` at ``beta = 0``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > t0):
        raise DomainError("event_cdf requires 0 <= t <= t0")
    if beta == 0.0:
        out = t_arr / t0
    elif beta * t0 > 700.0:
        out = np.exp(beta * (t_arr - t0)) * (-np.expm1(-beta * t_arr)) / (-math.expm1(-beta * t0))
    else:
        out = np.expm1(beta * t_arr) / math.expm1(beta * t0)
    return float(out) if np.ndim(t) == 0 else out


def event_quantile(v, beta: float, t0: float):
    """Inverse of :func:`event_cdf`."""
    v = np.asarray(v, dtype=float)
    if beta == 0.0:
        return v * t0
    x = beta * t0
    with np.errstate(divide="ignore"):
        if x > 700.0:
            # log(1 + v expm1(x)) = x + log(v + (1 - v) e^{-x})
            t = (x + np.logaddexp(np.log(v), np.log1p(-v) - x)) / beta
        elif x < -1.0:
            # 1 + v expm1(x) = (1 - v) + v e^x, which log1p loses as v -> 1
            t = np.logaddexp(np.log1p(-v), np.log(v) + x) / beta
        else:
            t = np.log1p(v * math.expm1(x)) / beta
    return np.clip(t, 0.0, t0)


def _g_mean(x: float) -> float:
    """``mu_T / t0`` as a function of ``x = beta t0``."""
    if abs(x) < 1e-4:
        return 0.5 + x / 12.0 - x**3 / 720.0
    if x > 700:
        return 1.0 - 1.0 / x
    return 1.0 + 1.0 / math.expm1(x) - 1.0 / x


def _g_var(x: float) -> float:
    """``sigma2_T / t0**2`` as a function of ``x = beta t0``."""
    if abs(x) < 0.05:
        x2 = x * x
        return 1.0 / 12.0 - x2 / 240.0 + x2 * x2 / 6048.0 - x2**3 / 172800.0
    if abs(x) > 1400:
        return 1.0 / (x * x)
    return 1.0 / (x * x) - 1.0 / (4.0 * math.sinh(0.5 * x) ** 2)


def event_mean(beta: float, t0: float) -> float:
    """``mu_T = t0 exp(beta t0) / (exp(beta t0) - 1) - 1 / beta``; ``t0 / 2`` at zero."""
    return t0 * _g_mean(beta * t0)


def event_var(beta: float, t0: float) -> float:
    """``1/beta**2 - t0**2 exp(beta t0) / (exp(beta t0) - 1)**2``; ``t0**2 / 12`` at zero."""
    return t0 * t0 * _g_var(beta * t0)


# ---------------------------------------------------------------------------
# conditional likelihood


def _log_expm1_ratio(x: float) -> float:
    """``log(expm1(x) / x)``, finite for all real x."""
    if abs(x) < 1e-8:
        return x / 2.0 + x * x / 24.0
    if x > 0:
        return x + math.log(-math.expm1(-x)) - math.log(x)
    return math.log(-math.expm1(x)) - math.log(-x)


def cond_loglik(cohort: CohortData, beta: float) -> float:
    """``sum m_i log(beta / (exp(beta t0) - 1)) + beta sum t``."""
    t0 = cohort.t0
    M = float(cohort.counts.sum())
    total = float(cohort.sums.sum())
    return M * (-math.log(t0) - _log_expm1_ratio(beta * t0)) + beta * total


def cond_score(cohort: CohortData, beta: float) -> float:
    """``sum t - M mu_T(beta)``."""
    return float(cohort.sums.sum() - cohort.counts.sum() * event_mean(beta, cohort.t0))


def cond_info(cohort: CohortData, beta: float) -> float:
    return float(cohort.counts.sum() * event_var(beta, cohort.t0))


def cond_mle(cohort: CohortData) -> float:
    """Solve ``mu_T(beta) = mean event time``; ``mu_T`` increases from 0 to t0."""
    M = int(cohort.counts.sum())
    if M < 1:
        raise DataError("no events in the cohort")
    t0 = cohort.t0
    target = float(cohort.sums.sum()) / M

    def g(b):
        return target - event_mean(b, t0)

    if g(0.0) == 0.0:
        return 0.0
    step = 1.0 / t0
    lo, hi = -step, step
    while g(lo) < 0:
        lo *= 2.0
        if lo < -1e6 / t0:
            raise ConvergenceError("mean event time at the lower boundary")
    while g(hi) > 0:
        hi *= 2.0
        if hi > 1e6 / t0:
            raise ConvergenceError("mean event time at the upper boundary")
    try:
        b = find_root_bracketed(g, lo, hi, tol=1e-14 / t0)
    except BracketError as exc:  # pragma: no cover - bracket established above
        raise ConvergenceError(str(exc)) from exc
    return float(b)


# ---------------------------------------------------------------------------
# conditional law of the sum of event times


def _logcomb(m: int, v: int) -> float:
    return math.lgamma(m + 1) - math.lgamma(v + 1) - math.lgamma(m - v + 1)


def cond_sum_cdf_exact(s: float, m: int, beta: float, t0: float) -> float:
    """Closed-form CDF of the sum of ``m`` iid event times, evaluated at ``s``.

    Inverting the Laplace transform gives an alternating sum over
    ``v = 0..floor(s / t0)``.  For ``beta < 0``, with ``b = -beta`` and
    ``q = exp(-b t0)``::

        F(s) = (1 - q)**-m * sum_v (-1)**v C(m, v) q**v P(m, b (s - v t0))

    with ``P`` the regularised lower incomplete gamma.  Positive ``beta``
    uses the reflection ``S -> m t0 - S``, which flips the sign of ``beta``;
    ``beta = 0`` is the scaled Irwin-Hall law.  Raises
    :class:`PrecisionLossError` when the terms cancel by more than 1e12.
    """
    m = int(m)
    if m < 1:
        raise DomainError("m must be a positive integer")
    if not t0 > 0:
        raise DomainError("t0 must be positive")
    s = float(s)
    if s <= 0.0:
        return 0.0
    if s >= m * t0:
        return 1.0
    if beta > 0.0:
        return 1.0 - _sum_cdf_decreasing(m * t0 - s, m, beta, t0)
    if beta < 0.0:
        return _sum_cdf_decreasing(s, m, -beta, t0)
    if s > 0.5 * m * t0:
        return 1.0 - _irwin_hall(m * t0 - s, m, t0)
    return _irwin_hall(s, m, t0)


def _irwin_hall(s: float, m: int, t0: float) -> float:
    vmax = min(int(math.floor(s / t0)), m)
    v = np.arange(vmax + 1)
    logc = np.array([_logcomb(m, int(k)) for k in v])
    x = s / t0 - v
    with np.errstate(divide="ignore"):
        mag = np.exp(logc + m * np.log(x) - math.lgamma(m + 1))
    terms = np.where(v % 2 == 0, mag, -mag)
    return _finish(terms)


def _sum_cdf_decreasing(s: float, m: int, b: float, t0: float) -> float:
    """CDF for intensity proportional to ``exp(-b t)``, ``b > 0``."""
    vmax = min(int(math.floor(s / t0)), m)
    v = np.arange(vmax + 1)
    logc = np.array([_logcomb(m, int(k)) for k in v])
    bt0 = b * t0
    log_norm = -m * math.log(-math.expm1(-bt0))
    p = reg_lower_gamma(float(m), b * np.maximum(s - v * t0, 0.0))
    with np.errstate(divide="ignore"):
        mag = np.exp(logc - v * bt0 + log_norm + np.log(p))
    terms = np.where(v % 2 == 0, mag, -mag)
    return _finish(terms)


def _finish(terms: np.ndarray) -> float:
    total = float(np.sum(terms))
    big = float(np.max(np.abs(terms)))
    if big == 0.0:
        return 0.0
    if big / max(abs(total), 1e-300) > CANCELLATION_LIMIT:
        raise PrecisionLossError(f"alternating sum cancels beyond {CANCELLATION_LIMIT:g}")
    return min(max(total, 0.0), 1.0)


def draw_event_sums(m: int, beta: float, t0: float, B: int, rng: RngStream) -> np.ndarray:
    """``B`` sums of ``m`` inverse-CDF event times."""
    v = rng.uniform01((B, m))
    return event_quantile(v, beta, t0).sum(axis=1)


def cond_sum_cdf_mc(s: float, m: int, beta: float, t0: float, B: int, rng: RngStream) -> float:
    """Randomised rank of ``s`` among ``B`` simulated sums: ``(#{sims < s} + V) / (B + 1)``."""
    if B < 1:
        raise DomainError("B must be at least 1")
    sims = draw_event_sums(m, beta, t0, B, rng)
    v = rng.uniform01()
    return (float(np.count_nonzero(sims < s)) + v) / (B + 1.0)


def cond_sum_cdf_normal(s: float, m: int, beta: float, t0: float) -> float:
    """``Phi((s - m mu_T) / sqrt(m sigma2_T))``."""
    if m < 1:
        raise DomainError("m must be a positive integer")
    mu = event_mean(beta, t0)
    sd = math.sqrt(m * event_var(beta, t0))
    return normal_cdf((s - m * mu) / sd)


# ---------------------------------------------------------------------------


def cohort_u(cohort: CohortData, beta: float, rng: RngStream, mc_B: int = 1000,
             normal_threshold: int = 40, method: str = "mc") -> USample:
    """One replicate per individual with at least one event.

    Counts below ``normal_threshold`` use the Monte Carlo rank (``method="mc"``)
    or the closed form falling back to Monte Carlo (``method="exact"``);
    larger counts use the normal approximation.  Individual ``i`` uses
    substream ``i`` of ``rng``.
    """
    if method not in ("mc", "exact"):
        raise DomainError("method must be 'mc' or 'exact'")
    t0 = cohort.t0
    vals = []
    for i, h in enumerate(cohort.histories):
        m = h.m
        if m == 0:
            continue
        s = float(h.times.sum())
        if m >= normal_threshold:
            vals.append(cond_sum_cdf_normal(s, m, beta, t0))
            continue
        if method == "exact":
            try:
                vals.append(cond_sum_cdf_exact(s, m, beta, t0))
                continue
            except PrecisionLossError:
                pass
        vals.append(cond_sum_cdf_mc(s, m, beta, t0, mc_B, rng.substream(i)))
    if not vals:
        raise DataError("no individual has any events")
    return USample(np.array(vals), beta)


def assess_cohort(cohort: CohortData, alpha: float, rng: RngStream, mc_B: int = 1000,
                  normal_threshold: int = 40, beta_override: float | None = None,
                  method: str = "mc", sides: str = "two-sided") -> AssessmentResult:
    """Assess the log-linear intensity model, at the estimate unless ``beta_override`` is set."""
    beta = cond_mle(cohort) if beta_override is None else float(beta_override)
    u = cohort_u(cohort, beta, rng, mc_B, normal_threshold, method)
    return assess(u, alpha, sides)
