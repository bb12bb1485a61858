"""Matched pairs with exponential or Weibull outcomes.

Two postulated models share the baseline rate ``gamma_j`` of pair ``j``:

* multiplicative: treated rate ``gamma_j * psi``.  ``Z = y1 / y0`` satisfies
  ``psi Z / (1 + psi Z) ~ Uniform(0, 1)``.
* additive: treated rate ``gamma_j + delta``.  Given ``s = y1 + y0`` the treated
  outcome has the truncated exponential law on ``(0, s)``, whose CDF gives
  the replicate.

Data generators allow Weibull outcomes so either model can be misspecified.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AssessmentResult, USample, assess
from .errors import BracketError, ConvergenceError, DataError, DomainError
from .numerics import RngStream, find_root_bracketed

EFFECT_KINDS = ("multiplicative", "additive")
PARAMETRIZATIONS = ("scale", "rate")


@dataclass(frozen=True)
class PairData:
    y1: np.ndarray
    y0: np.ndarray

    def __post_init__(self):
        y1 = np.asarray(self.y1, dtype=float).ravel()
        y0 = np.asarray(self.y0, dtype=float).ravel()
        if y1.shape != y0.shape:
            raise DataError("y1 and y0 must have equal length")
        if y1.size == 0:
            raise DataError("no pairs")
        if not (np.all(np.isfinite(y1)) and np.all(np.isfinite(y0))):
            raise DataError("outcomes must be finite")
        if np.any(y1 <= 0) or np.any(y0 <= 0):
            raise DataError("outcomes must be strictly positive")
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y0", y0)

    @property
    def m(self) -> int:
        return int(self.y1.size)

    @property
    def z(self) -> np.ndarray:
        return self.y1 / self.y0

    @property
    def s(self) -> np.ndarray:
        return self.y1 + self.y0

    def swapped(self) -> "PairData":
        return PairData(self.y0, self.y1)


@dataclass(frozen=True)
class PairGenSpec:
    """Simulation design for ``m`` pairs.

    ``parametrization`` fixes how a rate ``lam`` enters the Weibull law:
    ``"scale"`` gives survival ``exp(-(lam t)**shape)`` and ``"rate"`` gives
    ``exp(-lam t**shape)``.  Both reduce to the exponential at ``shape = 1``.
    ``gamma_range`` bounds the uniform baseline rates.
    """

    effect_kind: str
    effect_value: float
    m: int
    shape: float = 1.0
    gamma_range: tuple[float, float] = (0.0, 1.0)
    parametrization: str = "scale"

    def __post_init__(self):
        if self.effect_kind not in EFFECT_KINDS:
            raise DomainError(f"effect_kind must be one of {EFFECT_KINDS}")
        if self.parametrization not in PARAMETRIZATIONS:
            raise DomainError(f"parametrization must be one of {PARAMETRIZATIONS}")
        if not self.shape > 0:
            raise DomainError("shape must be positive")
        if self.m < 1:
            raise DomainError("m must be at least 1")
        lo, hi = self.gamma_range
        if not 0.0 <= lo < hi:
            raise DomainError("gamma_range must satisfy 0 <= lo < hi")
        if self.effect_kind == "multiplicative" and not self.effect_value > 0:
            raise DomainError("multiplicative effect must be positive")
        if self.effect_kind == "additive" and hi + self.effect_value <= 0:
            raise DomainError("gamma + delta is never positive")


def _weibull(rate, shape, e, parametrization):
    if parametrization == "scale":
        return e ** (1.0 / shape) / rate
    return (e / rate) ** (1.0 / shape)


def gen_pairs(spec: PairGenSpec, rng: RngStream) -> PairData:
    """Draw ``m`` pairs: baseline rates, then untreated and treated outcomes."""
    lo, hi = spec.gamma_range
    gamma = rng.uniform(lo, hi, spec.m)
    if spec.effect_kind == "additive":
        bad = gamma + spec.effect_value <= 0
        # bounded: PairGenSpec validation guarantees a positive-probability region
        for _ in range(10_000):
            if not bad.any():
                break
            gamma[bad] = rng.uniform(lo, hi, int(bad.sum()))
            bad = gamma + spec.effect_value <= 0
        else:
            raise DomainError("could not draw gamma with gamma + delta > 0")
        rate1 = gamma + spec.effect_value
    else:
        rate1 = gamma * spec.effect_value
    e0 = rng.unit_exponential(spec.m)
    e1 = rng.unit_exponential(spec.m)
    y0 = _weibull(gamma, spec.shape, e0, spec.parametrization)
    y1 = _weibull(rate1, spec.shape, e1, spec.parametrization)
    return PairData(y1, y0)


# ---------------------------------------------------------------------------
# multiplicative model


def mult_u(pairs: PairData, psi0: float) -> USample:
    if not psi0 > 0:
        raise DomainError("psi0 must be positive")
    pz = psi0 * pairs.z
    return USample(pz / (1.0 + pz), psi0)


def mult_mle(pairs: PairData) -> float:
    """Root of ``m / psi = 2 sum Z / (1 + psi Z)``, searched in ``log psi``.

    Multiplying the score by ``psi`` shows the estimate makes the replicates
    sum to ``m / 2``.
    """
    z = pairs.z
    m = pairs.m

    def g(t):
        pz = np.exp(t) * z
        return m - 2.0 * np.sum(pz / (1.0 + pz))

    try:
        t = find_root_bracketed(g, np.log(1e-8), np.log(1e8), tol=1e-13)
    except BracketError as exc:
        raise ConvergenceError("multiplicative score has no root in [1e-8, 1e8]") from exc
    return float(np.exp(t))


def mult_observed_info(pairs: PairData, psi: float) -> float:
    """Negative second derivative of ``sum[log psi - 2 log(1 + psi Z)]``."""
    z = pairs.z
    return float(pairs.m / psi**2 - 2.0 * np.sum(z**2 / (1.0 + psi * z) ** 2))


# ---------------------------------------------------------------------------
# additive model


def _phi(x):
    """``1/x - 1/expm1(x)``: decreasing from 1 to 0, equal to 1/2 at 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    small = np.abs(x) < 1e-5
    xs = x[small]
    out[small] = 0.5 - xs / 12.0 + xs**3 / 720.0
    xl = x[~small]
    with np.errstate(over="ignore"):
        out[~small] = 1.0 / xl - 1.0 / np.expm1(xl)
    return out


def add_u(pairs: PairData, delta0: float) -> USample:
    """``(1 - exp(-delta y1)) / (1 - exp(-delta s))``, stable for any sign of delta."""
    y1, y0, s = pairs.y1, pairs.y0, pairs.s
    d = float(delta0)
    if d == 0.0:
        u = y1 / s
    elif d > 0:
        u = np.expm1(-d * y1) / np.expm1(-d * s)
    else:
        # multiply through by exp(d s) so nothing overflows
        a = -d
        u = np.exp(-a * y0) * np.expm1(-a * y1) / np.expm1(-a * s)
    return USample(np.clip(u, 0.0, 1.0), d)


def add_score(pairs: PairData, delta: float) -> float:
    """Derivative of the conditional log-likelihood ``sum[s phi(delta s)] - sum y1``."""
    s = pairs.s
    return float(np.sum(s * _phi(delta * s)) - np.sum(pairs.y1))


def add_loglik(pairs: PairData, delta: float) -> float:
    """``sum[log delta - delta y1 - log(1 - exp(-delta s))]``, continuous through 0."""
    s, y1 = pairs.s, pairs.y1
    x = delta * s
    out = np.empty(x.shape)
    small = np.abs(x) < 1e-8
    out[small] = -x[small] / 2.0 + x[small] ** 2 / 24.0
    pos = (~small) & (x > 0)
    out[pos] = np.log(-np.expm1(-x[pos])) - np.log(x[pos])
    neg = (~small) & (x < 0)
    ax = -x[neg]
    out[neg] = ax + np.log(-np.expm1(-ax)) - np.log(ax)
    # log density of y1 given s: -log s - log h(delta s) - delta y1
    return float(np.sum(-np.log(s) - out - delta * y1))


def add_mle(pairs: PairData) -> float:
    """Conditional-likelihood estimate of the additive effect.

    The log-likelihood is strictly concave, so the estimate is the unique
    root of :func:`add_score`, searched in ``[-50/max s, 50/min s]``.
    """
    if pairs.m < 2:
        raise DomainError("add_mle needs at least two pairs")
    s = pairs.s
    lo, hi = -50.0 / s.max(), 50.0 / s.min()
    scale = np.sum(pairs.y1)
    try:
        return find_root_bracketed(lambda d: add_score(pairs, d) / scale, lo, hi,
                                   tol=1e-12 * max(abs(lo), abs(hi), 1.0))
    except BracketError as exc:
        raise ConvergenceError("additive score has no root in the search bracket") from exc


# ---------------------------------------------------------------------------


def assess_pairs(pairs: PairData, postulated: str, alpha: float,
                 sides: str = "two-sided") -> AssessmentResult:
    """Plug the estimate into the postulated model's replicates and test them."""
    if postulated == "multiplicative":
        u = mult_u(pairs, mult_mle(pairs))
    elif postulated == "additive":
        u = add_u(pairs, add_mle(pairs))
    else:
        raise DomainError(f"postulated must be one of {EFFECT_KINDS}")
    return assess(u, alpha, sides)
