"""Analytic power of the Fisher combination test under misspecification.

If a replicate has CDF ``F`` on ``[0, 1]``, then ``R = -log U`` has
``E(R) = int F(u)/u du`` and ``E(R^2) = -2 int log(u) F(u)/u du``.  The parametric
family ``F(u) = u**(1 - theta)`` makes ``R`` exponential with rate ``1 - theta``.
That gives closed forms, a Chernoff-type lower bound on power, and a normal
approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .numerics import (
    QuadratureSpec, adaptive_quad, chi2_quantile, find_root_bracketed,
    normal_quantile, normal_sf,
)

MOMENT_SPEC = QuadratureSpec(abs_tol=1e-10, max_depth=60)


@dataclass(frozen=True)
class ThetaFamily:
    thetas: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thetas, dtype=float).ravel()
        if t.size == 0:
            raise DomainError("need at least one theta")
        if np.any(t < 0) or np.any(t >= 1):
            raise DomainError("thetas must lie in [0, 1)")
        object.__setattr__(self, "thetas", t)

    @property
    def m(self) -> int:
        return int(self.thetas.size)

    @property
    def theta_max(self) -> float:
        return float(self.thetas.max())

    @property
    def t_max(self) -> float:
        return 1.0 - self.theta_max

    def cdf(self, j: int) -> Callable[[np.ndarray], np.ndarray]:
        th = float(self.thetas[j])
        return lambda u: np.asarray(u, dtype=float) ** (1.0 - th)


@dataclass(frozen=True)
class PowerGrid:
    sigma_axis: np.ndarray
    psi_axis: np.ndarray
    logE: np.ndarray
    logV: np.ndarray
    plugin: str = "first-order"

    def rows(self):
        for i, s in enumerate(self.sigma_axis):
            for j, p in enumerate(self.psi_axis):
                yield {"sigma": float(s), "psi_star": float(p),
                       "logE": float(self.logE[i, j]), "logV": float(self.logV[i, j])}


def moments_from_cdf(F: Callable, spec: QuadratureSpec | None = None) -> tuple[float, float]:
    """Mean and variance of ``-log U`` for ``U`` with CDF ``F``.

    Substituting ``u = exp(-q)`` and then ``q = t / (1 - t)`` maps both
    integrals onto ``(0, 1)`` with bounded integrands.
    """
    spec = spec or MOMENT_SPEC

    def jac(t):
        t = np.asarray(t, dtype=float)
        q = t / (1.0 - t)
        with np.errstate(over="ignore", under="ignore"):
            f = np.asarray(F(np.exp(-q)), dtype=float)
        return q, f / (1.0 - t) ** 2

    e = adaptive_quad(lambda t: jac(t)[1], 0.0, 1.0, spec)
    s2 = adaptive_quad(lambda t: 2.0 * np.prod(jac(t), axis=0), 0.0, 1.0, spec)
    return e, s2 - e * e


def para_moments(fam: ThetaFamily) -> tuple[float, float]:
    """``E(R) = 2 sum 1/(1 - theta)`` and ``V(R) = 4 sum 1/(1 - theta)**2`` for ``R = -2 sum log U``."""
    w = 1.0 / (1.0 - fam.thetas)
    return float(2.0 * np.sum(w)), float(4.0 * np.sum(w * w))


def markov_bound(fam: ThetaFamily, alpha: float) -> float:
    """Lower bound on ``P(R >= k_alpha)`` from Markov's inequality on ``exp(-tR)``.

    ``1 - inf_{t > 0} exp(t k) prod (1 - theta)/(1 - theta + 2t)`` with
    ``k = chi2_quantile(1 - alpha, 2m)``.  The log-objective is convex; the
    infimum is 1 (bound 0) when its slope at ``t = 0`` is nonnegative.
    """
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    k = chi2_quantile(1.0 - alpha, 2 * fam.m)
    a = 1.0 - fam.thetas

    def logobj(t):
        return t * k + float(np.sum(np.log(a) - np.log(a + 2.0 * t)))

    def slope(t):
        return k - float(np.sum(2.0 / (a + 2.0 * t)))

    if slope(0.0) >= 0.0:
        return 0.0
    hi = 1.0
    while slope(hi) < 0.0:
        hi *= 2.0
    t_star = find_root_bracketed(slope, 0.0, hi, tol=1e-14 * hi)
    val = logobj(t_star)
    return float(max(0.0, -math.expm1(val))) if val < 0 else 0.0


def normal_power(mu_m: float, tau_m: float, m: int, alpha: float) -> float:
    """``1 - Phi((2m + 2 sqrt(m) z_alpha - 2 mu) / (2 tau))``.

    ``mu_m`` and ``tau_m`` are the mean and standard deviation of
    ``-sum log U``.
    """
    if not tau_m > 0:
        raise DomainError("tau_m must be positive")
    z = normal_quantile(1.0 - alpha)
    return float(normal_sf((2.0 * m + 2.0 * math.sqrt(m) * z - 2.0 * mu_m) / (2.0 * tau_m)))


def weibull_u_cdf(u, sigma_shape: float, psi_star: float, psi0: float):
    """CDF of ``psi0 Z / (1 + psi0 Z)`` when pairs are Weibull with shape ``sigma_shape``.

    ``psi* u^s / (psi0^s (1 - u)^s + psi* u^s)``.
    """
    if not (sigma_shape > 0 and psi_star > 0 and psi0 > 0):
        raise DomainError("shape, psi_star and psi0 must be positive")
    u_arr = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        num = psi_star * u_arr**sigma_shape
        den = psi0**sigma_shape * (1.0 - u_arr) ** sigma_shape + num
        out = np.where(u_arr <= 0, 0.0, np.where(u_arr >= 1, 1.0, num / den))
    return float(out) if np.ndim(u) == 0 else out


def additive_cdf(u, gamma: float, delta: float, psi0: float):
    """CDF of the multiplicative replicate when the truth is additive: ``eta u / (1 - u + eta u)``."""
    eta = (gamma + delta) / (gamma * psi0)
    u = np.asarray(u, dtype=float)
    return eta * u / ((1.0 - u) + eta * u)


def additive_ER(gamma: float, delta: float, psi0: float) -> float:
    """``eta log(eta) / (eta - 1)`` with ``eta = (gamma + delta) / (gamma psi0)``."""
    if not (gamma > 0 and psi0 > 0 and gamma + delta > 0):
        raise DomainError("need gamma > 0, psi0 > 0 and gamma + delta > 0")
    eta = (gamma + delta) / (gamma * psi0)
    e = eta - 1.0
    if abs(e) < 1e-6:
        return 1.0 + e / 2.0 - e * e / 6.0
    return eta * math.log(eta) / e


def plugin_limit(sigma_shape: float, psi_star: float) -> float:
    """Exact limit of the misspecified multiplicative estimate under Weibull pairs.

    Solves ``1/psi0 = 2 psi* s int_0^inf z^s / ((1 + psi* z^s)^2 (1 + psi0 z)) dz``
    for ``psi0``.
    """
    s, p = sigma_shape, psi_star

    def integral(psi0):
        # split at z = 1, map z = v**(1/s) on (0, 1) and z = v**(-1/s) above;
        # both pieces become smooth integrands on (0, 1) that carry a factor 1/s
        def f(v):
            v = np.asarray(v, dtype=float)
            w = v ** (1.0 / s)
            return w / ((1.0 + p * v) ** 2 * (1.0 + psi0 * w)) + 1.0 / ((v + p) ** 2 * (w + psi0))
        return adaptive_quad(f, 0.0, 1.0, QuadratureSpec(abs_tol=1e-13)) / s

    def g(lp):
        psi0 = math.exp(lp)
        return 2.0 * p * s * psi0 * integral(psi0) - 1.0

    lo, hi = math.log(p) - 1.0, math.log(p) + 1.0
    while g(lo) > 0:
        lo -= 1.0
    while g(hi) < 0:
        hi += 1.0
    return math.exp(find_root_bracketed(g, lo, hi, tol=1e-11))


PLUGIN_RULES = ("first-order", "exact")


def heatmap_grid(sigma_axis: Sequence[float], psi_axis: Sequence[float],
                 psi_plugin_rule: str = "first-order") -> PowerGrid:
    """``log E(R_j)`` and ``log V(R_j)`` over (shape, psi*) for Weibull-truth pairs."""
    if psi_plugin_rule not in PLUGIN_RULES:
        raise DomainError(f"psi_plugin_rule must be one of {PLUGIN_RULES}")
    sig = np.asarray(sigma_axis, dtype=float).ravel()
    psi = np.asarray(psi_axis, dtype=float).ravel()
    if sig.size == 0 or psi.size == 0:
        raise DomainError("axes must be nonempty")
    logE = np.empty((sig.size, psi.size))
    logV = np.empty_like(logE)
    for i, s in enumerate(sig):
        for j, p in enumerate(psi):
            p0 = p if psi_plugin_rule == "first-order" else plugin_limit(s, p)
            e, v = moments_from_cdf(lambda u, s=s, p=p, p0=p0: weibull_u_cdf(u, s, p, p0))
            logE[i, j] = math.log(e)
            logV[i, j] = math.log(v)
    return PowerGrid(sig, psi, logE, logV, psi_plugin_rule)


def _ratio_r(x: float) -> float:
    """``2 x (log x + 1/x - 1) / (x - 1)^2``, equal to 1 at ``x = 1`` and decreasing."""
    d = x - 1.0
    if abs(d) < 1e-3:
        return 1.0 - d / 3.0 + d * d / 6.0 - d**3 / 10.0
    return 2.0 * (x * math.log(x) + 1.0 - x) / (d * d)


def solve_intersection_x(eps: float) -> float:
    """Nontrivial root of ``(x - 1)^2 = 2 (1 + eps) x (log x + 1/x - 1)``.

    ``x = 1`` is always a double root.  Dividing it out leaves
    ``r(x) = 1 / (1 + eps)`` with ``r`` decreasing from 2 to 0, so the other
    root is unique and moves through 1 as ``eps`` crosses 0 (about ``1 + 3 eps``).
    """
    if not abs(eps) < 0.5:
        raise DomainError("|eps| must be below 0.5")
    if eps == 0.0:
        return 1.0
    target = 1.0 / (1.0 + eps)
    return find_root_bracketed(lambda x: _ratio_r(x) - target, 1e-6, 1e6, tol=1e-14)
