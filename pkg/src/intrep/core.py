"""Fisher combination of replicate PIT values and scalar confidence-set scans.

A :class:`USample` holds values that are iid Uniform(0, 1) when the postulated
model is correct.  ``R_u = -2 sum log U`` and ``R_comp = -2 sum log(1 - U)`` are
then both chi-square with ``2m`` degrees of freedom.  ``R_u`` is large when mass
piles up near 0 and small when it piles up near 1; ``R_comp`` mirrors it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .numerics import chi2_cdf, chi2_sf

CLAMP_LO = 1e-15
CLAMP_HI = 1.0 - 1e-15

SIDES = ("two-sided", "upper")


@dataclass(frozen=True)
class USample:
    """Replicate values in (0, 1) plus the parameter value used to build them."""

    values: np.ndarray
    psi_tag: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < 1:
            raise DomainError("USample needs at least one value")
        if not np.all(np.isfinite(v)) or np.any(v < 0.0) or np.any(v > 1.0):
            raise DomainError("USample values must lie in [0, 1]")
        v = np.clip(v, CLAMP_LO, CLAMP_HI)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return int(self.values.size)

    def complement(self) -> "USample":
        return USample(1.0 - self.values, self.psi_tag)

    def __len__(self) -> int:
        return self.m


@dataclass(frozen=True)
class AssessmentResult:
    """Fisher statistics, tail p-values and decisions for one USample.

    ``p_right_*`` are upper-tail chi-square p-values and ``p_left_*`` lower-tail
    ones.  ``p_u`` / ``p_comp`` are the p-values the decisions use: the upper
    tail when ``sides == "upper"``, otherwise ``2 * min(left, right)`` so each
    tail is tested at ``alpha / 2``.
    """

    r_u: float
    r_comp: float
    p_right_u: float
    p_right_comp: float
    p_left_u: float
    p_left_comp: float
    p_u: float
    p_comp: float
    reject_u: bool
    reject_comp: bool
    alpha: float
    m: int
    sides: str = "two-sided"
    psi_tag: float | None = None

    @property
    def rejected(self) -> bool:
        return self.reject_u or self.reject_comp

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def fisher_statistic(u: USample) -> float:
    """``-2 * sum(log u)``."""
    v = u.values
    if np.any(v <= 0.0) or np.any(v >= 1.0):
        raise DomainError("values at 0 or 1 after clamping")
    return float(-2.0 * np.sum(np.log(v)))


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def _decision_p(left, right, sides: str):
    if sides == "upper":
        return right
    if sides == "two-sided":
        return np.minimum(1.0, 2.0 * np.minimum(left, right))
    raise DomainError(f"sides must be one of {SIDES}, got {sides!r}")


def fisher_pvalues(r, m, sides: str = "two-sided"):
    """Vectorised (left, right, decision) p-values for statistics ``r`` on ``2m`` df."""
    r = np.asarray(r, dtype=float)
    df = 2.0 * np.asarray(m, dtype=float)
    left = chi2_cdf(r, df)
    right = chi2_sf(r, df)
    return left, right, _decision_p(left, right, sides)


def assess(u: USample, alpha: float, sides: str = "two-sided") -> AssessmentResult:
    """Fisher combination test on ``u`` and on ``1 - u``.

    ``sides="upper"`` rejects on large statistics only.  The default tests
    both tails of each statistic at ``alpha / 2``, which is the convention the
    simulation tables follow.
    """
    _check_alpha(alpha)
    r_u = fisher_statistic(u)
    r_c = fisher_statistic(u.complement())
    lu, ru, pu = (float(x) for x in fisher_pvalues(r_u, u.m, sides))
    lc, rc, pc = (float(x) for x in fisher_pvalues(r_c, u.m, sides))
    return AssessmentResult(
        r_u=r_u, r_comp=r_c,
        p_right_u=ru, p_right_comp=rc, p_left_u=lu, p_left_comp=lc,
        p_u=pu, p_comp=pc,
        reject_u=bool(pu < alpha), reject_comp=bool(pc < alpha),
        alpha=alpha, m=u.m, sides=sides, psi_tag=u.psi_tag,
    )


@dataclass(frozen=True)
class ConfidenceSet1D:
    grid: np.ndarray
    accepted: np.ndarray
    alpha: float
    p_right_u: np.ndarray = field(default=None, repr=False)
    p_right_comp: np.ndarray = field(default=None, repr=False)

    @property
    def empty(self) -> bool:
        return not bool(np.any(self.accepted))

    @property
    def accepted_values(self) -> np.ndarray:
        return self.grid[self.accepted]


def confidence_set_scan(builder: Callable[[float], USample], grid: Sequence[float],
                        alpha: float) -> ConfidenceSet1D:
    """Grid points not rejected by either upper-tail test at ``alpha / 2``.

    An empty set signals that no parameter value makes the model fit.
    """
    _check_alpha(alpha)
    g = np.asarray(grid, dtype=float).ravel()
    if g.size == 0:
        raise DomainError("grid must be nonempty")
    if g.size > 1 and np.any(np.diff(g) <= 0):
        raise DomainError("grid must be strictly increasing")
    pu = np.empty(g.size)
    pc = np.empty(g.size)
    for i, psi in enumerate(g):
        res = assess(builder(float(psi)), alpha, sides="upper")
        pu[i], pc[i] = res.p_right_u, res.p_right_comp
    accepted = np.minimum(pu, pc) >= alpha / 2.0
    return ConfidenceSet1D(g, accepted, alpha, pu, pc)
