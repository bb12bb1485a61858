"""Stratified two-group comparisons: normal means, Poisson counts, gamma totals.

Each stratum ``j`` carries treated and untreated sufficient statistics
``s1[j]``, ``s0[j]`` from ``r1[j]`` and ``r0[j]`` units.  The nuisance level of
a stratum is removed by differencing (normal), conditioning on the total
(Poisson) or taking a ratio (gamma), which leaves one replicate per stratum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AssessmentResult, USample, assess
from .errors import BracketError, ConvergenceError, DataError, DomainError
from .numerics import (
    RngStream, binom_cdf, binom_pmf, f_cdf, f_logpdf, find_root_bracketed, normal_cdf,
)

FAMILIES = ("normal", "poisson", "gamma")


@dataclass(frozen=True)
class StratumData:
    """Per-stratum statistics.  For ``normal`` the ``s`` are group means,
    for ``poisson`` total counts and for ``gamma`` total times."""

    s1: np.ndarray
    s0: np.ndarray
    r1: np.ndarray
    r0: np.ndarray
    family: str

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"family must be one of {FAMILIES}")
        arrs = [np.asarray(a, dtype=float).ravel() for a in (self.s1, self.s0, self.r1, self.r0)]
        if len({a.size for a in arrs}) != 1 or arrs[0].size == 0:
            raise DataError("s1, s0, r1, r0 must be nonempty with equal lengths")
        s1, s0, r1, r0 = arrs
        if not all(np.all(np.isfinite(a)) for a in arrs):
            raise DataError("non-finite stratum values")
        if np.any(r1 < 1) or np.any(r0 < 1) or np.any(r1 != np.round(r1)) or np.any(r0 != np.round(r0)):
            raise DataError("stratum sizes must be positive integers")
        if self.family == "poisson" and (
            np.any(s1 < 0) or np.any(s0 < 0) or np.any(s1 != np.round(s1)) or np.any(s0 != np.round(s0))
        ):
            raise DataError("poisson counts must be nonnegative integers")
        if self.family == "gamma" and (np.any(s1 <= 0) or np.any(s0 <= 0)):
            raise DataError("gamma totals must be positive")
        for name, a in zip(("s1", "s0", "r1", "r0"), arrs):
            object.__setattr__(self, name, a)

    @property
    def m(self) -> int:
        return int(self.s1.size)

    def swapped(self) -> "StratumData":
        return StratumData(self.s0, self.s1, self.r0, self.r1, self.family)


def _require(strata: StratumData, family: str) -> None:
    if strata.family != family:
        raise DomainError(f"expected {family} strata, got {strata.family}")


# ---------------------------------------------------------------------------
# normal


def _weights(strata: StratumData) -> np.ndarray:
    return 1.0 / (1.0 / strata.r1 + 1.0 / strata.r0)


def normal_u(strata: StratumData, psi_hat: float, tau_hat: float) -> USample:
    """``Phi((Z - psi) / sqrt(tau (1/r1 + 1/r0)))`` with ``Z = s1 - s0``."""
    _require(strata, "normal")
    if not tau_hat > 0:
        raise DomainError("tau_hat must be positive")
    z = strata.s1 - strata.s0
    sd = np.sqrt(tau_hat / _weights(strata))
    return USample(normal_cdf((z - psi_hat) / sd), psi_hat)


def normal_estimate(strata: StratumData) -> tuple[float, float]:
    """Weighted mean of the differences and the weighted residual variance (divisor m - 1)."""
    _require(strata, "normal")
    if strata.m < 2:
        raise DomainError("normal_estimate needs at least two strata")
    z = strata.s1 - strata.s0
    w = _weights(strata)
    psi = float(np.sum(w * z) / np.sum(w))
    tau = float(np.sum(w * (z - psi) ** 2) / (strata.m - 1))
    if not tau > 0:
        raise DataError("all differences are equal; variance estimate is zero")
    return psi, tau


# ---------------------------------------------------------------------------
# poisson


def _pi(strata: StratumData, psi):
    a = strata.r1 * psi
    return a / (a + strata.r0)


def poisson_u(strata: StratumData, psi0: float, rng: RngStream) -> USample:
    """Randomised PIT of ``s1`` under its binomial law given the stratum total.

    One uniform is drawn per stratum, in stratum order, including empty strata.
    """
    _require(strata, "poisson")
    if not psi0 > 0:
        raise DomainError("psi0 must be positive")
    n = strata.s1 + strata.s0
    p = _pi(strata, psi0)
    v = rng.uniform01(strata.m)
    u = binom_cdf(strata.s1 - 1.0, n, p) + v * binom_pmf(strata.s1, n, p)
    return USample(np.clip(u, 0.0, 1.0), psi0)


def poisson_mle(strata: StratumData) -> float:
    """Conditional binomial estimate of the rate ratio."""
    _require(strata, "poisson")
    n = strata.s1 + strata.s0
    if not np.any(n >= 1):
        raise DataError("every stratum is empty")
    if np.all(strata.s1 == 0) or np.all(strata.s0 == 0):
        raise DataError("estimate on the boundary: one group has no events")
    s1_total = np.sum(strata.s1)

    def g(t):
        return (s1_total - np.sum(n * _pi(strata, np.exp(t)))) / n.sum()

    lo, hi = -1.0, 1.0
    while g(lo) < 0 and lo > -200:
        lo *= 2
    while g(hi) > 0 and hi < 200:
        hi *= 2
    try:
        return float(np.exp(find_root_bracketed(g, lo, hi, tol=1e-13)))
    except BracketError as exc:
        raise ConvergenceError("poisson score has no root") from exc


# ---------------------------------------------------------------------------
# gamma / F pivot


def _ratio(strata: StratumData) -> np.ndarray:
    return strata.r0 * strata.s1 / (strata.r1 * strata.s0)


def gamma_f_u(strata: StratumData, psi0: float) -> USample:
    """``F_{2 r1, 2 r0}(psi0 W)`` with ``W = r0 s1 / (r1 s0)``."""
    _require(strata, "gamma")
    if not psi0 > 0:
        raise DomainError("psi0 must be positive")
    return USample(f_cdf(psi0 * _ratio(strata), 2.0 * strata.r1, 2.0 * strata.r0), psi0)


def gamma_loglik(strata: StratumData, psi: float) -> float:
    """``sum log[psi f_F(psi W; 2 r1, 2 r0)]``."""
    _require(strata, "gamma")
    x = psi * _ratio(strata)
    return float(np.sum(np.log(psi) + f_logpdf(x, 2.0 * strata.r1, 2.0 * strata.r0)))


def gamma_mle(strata: StratumData) -> float:
    """Maximiser of the F-pivot likelihood.

    In ``t = log psi`` the log-likelihood is concave with derivative
    ``sum[r1 - (r1 + r0) psi s1 / (s0 + psi s1)]``; its root is the maximiser.
    """
    _require(strata, "gamma")
    r1, r0, s1, s0 = strata.r1, strata.r0, strata.s1, strata.s0
    scale = np.sum(r1 + r0)

    def g(t):
        ps = np.exp(t) * s1
        return np.sum(r1 - (r1 + r0) * ps / (s0 + ps)) / scale

    try:
        t = find_root_bracketed(g, np.log(1e-8), np.log(1e8), tol=1e-13)
    except BracketError as exc:
        raise ConvergenceError("gamma score has no root in [1e-8, 1e8]") from exc
    return float(np.exp(t))


# ---------------------------------------------------------------------------


def assess_strata(strata: StratumData, alpha: float, rng: RngStream | None = None,
                  sides: str = "two-sided") -> AssessmentResult:
    """Plug-in assessment for any of the three families."""
    if strata.family == "normal":
        psi, tau = normal_estimate(strata)
        u = normal_u(strata, psi, tau)
    elif strata.family == "poisson":
        if rng is None:
            raise DomainError("poisson assessment needs an RngStream")
        u = poisson_u(strata, poisson_mle(strata), rng)
    else:
        u = gamma_f_u(strata, gamma_mle(strata))
    return assess(u, alpha, sides)


# ---------------------------------------------------------------------------
# generators


def _sizes(rng: RngStream, m: int, r_range: tuple[int, int]) -> np.ndarray:
    lo, hi = r_range
    return np.floor(rng.uniform(lo, hi + 1, m)).clip(lo, hi)


def gen_normal_strata(m: int, psi: float, tau: float, rng: RngStream,
                      r_range: tuple[int, int] = (1, 5),
                      gamma_range: tuple[float, float] = (0.0, 1.0)) -> StratumData:
    """Group means of ``N(gamma_j + psi, tau)`` and ``N(gamma_j, tau)`` units."""
    r1 = _sizes(rng, m, r_range)
    r0 = _sizes(rng, m, r_range)
    gamma = rng.uniform(*gamma_range, m)
    sd = np.sqrt(tau)
    s1 = gamma + psi + sd * rng.std_normal(m) / np.sqrt(r1)
    s0 = gamma + sd * rng.std_normal(m) / np.sqrt(r0)
    return StratumData(s1, s0, r1, r0, "normal")


def gen_poisson_strata(m: int, psi: float, rng: RngStream, r_range: tuple[int, int] = (1, 5),
                       gamma_range: tuple[float, float] = (0.5, 1.5)) -> StratumData:
    """Totals of Poisson counts with rates ``gamma_j psi`` and ``gamma_j`` per unit."""
    r1 = _sizes(rng, m, r_range)
    r0 = _sizes(rng, m, r_range)
    gamma = rng.uniform(*gamma_range, m)
    g = rng.generator
    s1 = g.poisson(r1 * gamma * psi).astype(float)
    s0 = g.poisson(r0 * gamma).astype(float)
    return StratumData(s1, s0, r1, r0, "poisson")


def gen_gamma_strata(m: int, psi: float, rng: RngStream, r_range: tuple[int, int] = (1, 4),
                     gamma_range: tuple[float, float] = (0.0, 1.0)) -> StratumData:
    """Total exponential times with rates ``gamma_j psi`` (treated) and ``gamma_j``."""
    r1 = _sizes(rng, m, r_range)
    r0 = _sizes(rng, m, r_range)
    gamma = rng.uniform(*gamma_range, m)
    g = rng.generator
    s1 = g.gamma(r1) / (gamma * psi)
    s0 = g.gamma(r0) / gamma
    return StratumData(s1, s0, r1, r0, "gamma")
