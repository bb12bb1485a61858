"""CSV readers for user data and one-shot assessment of a file."""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .core import AssessmentResult
from .errors import DataError, DomainError
from .numerics import RngStream, rng_stream
from .pairs import PairData, assess_pairs
from .ph import SurvData, assess_ph
from .poisson import CohortData, EventHistory, assess_cohort
from .regression import RegressionData
from .two_group import StratumData, assess_strata

FILE_KINDS = ("pairs", "survival", "events", "strata")


def _read(path: str | Path, required: list[str]) -> tuple[list[str], list[tuple[int, dict]]]:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        reader.fieldnames = header
        rows = [(reader.line_num, row) for row in reader]
    if not rows:
        raise DataError(f"{path}: no data rows")
    return header, rows


def _num(row: dict, col: str, line: int, allow_blank: bool = False) -> float:
    raw = (row.get(col) or "").strip()
    if raw == "" and allow_blank:
        return np.nan
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"row {line}: column {col!r} has non-numeric value {raw!r}") from None


def _indexed(header: list[str], prefix: str) -> list[str]:
    pat = re.compile(rf"^{prefix}(\d+)$")
    cols = sorted((int(m.group(1)), h) for h in header if (m := pat.match(h)))
    return [h for _, h in cols]


def read_pairs(path) -> PairData:
    _, rows = _read(path, ["y1", "y0"])
    y1 = [_num(r, "y1", ln) for ln, r in rows]
    y0 = [_num(r, "y0", ln) for ln, r in rows]
    return PairData(np.array(y1), np.array(y0))


def read_survival(path) -> SurvData:
    header, rows = _read(path, ["time", "status"])
    xcols = _indexed(header, "x")
    if not xcols:
        raise DataError(f"{path}: missing covariate column(s) x1..xp")
    y = np.array([_num(r, "time", ln) for ln, r in rows])
    d = np.array([_num(r, "status", ln) for ln, r in rows])
    for (ln, _), v in zip(rows, d):
        if v not in (0.0, 1.0):
            raise DataError(f"row {ln}: status must be 0 or 1, got {v:g}")
    x = np.array([[_num(r, c, ln) for c in xcols] for ln, r in rows])
    return SurvData(y, d.astype(int), x)


def read_events(path, t0: float) -> CohortData:
    """Rows of ``individual_id, event_time``; a blank time lists an individual with no events."""
    if not t0 > 0:
        raise DataError("t0 must be positive")
    _, rows = _read(path, ["individual_id", "event_time"])
    times: dict[str, list[float]] = {}
    for ln, r in rows:
        ident = (r.get("individual_id") or "").strip()
        if not ident:
            raise DataError(f"row {ln}: empty individual_id")
        t = _num(r, "event_time", ln, allow_blank=True)
        bucket = times.setdefault(ident, [])
        if np.isnan(t):
            continue
        if not 0 < t <= t0:
            raise DataError(f"row {ln}: event_time {t:g} outside (0, t0={t0:g}]")
        bucket.append(t)
    hist = [EventHistory(np.sort(np.array(ts, dtype=float)), t0) for ts in times.values()]
    return CohortData(tuple(hist))


def read_strata(path, family: str) -> StratumData:
    _, rows = _read(path, ["s1", "s0", "r1", "r0"])
    cols = {c: np.array([_num(r, c, ln) for ln, r in rows]) for c in ("s1", "s0", "r1", "r0")}
    return StratumData(cols["s1"], cols["s0"], cols["r1"], cols["r0"], family)


def read_regression(path, sigma: float | None = None) -> RegressionData:
    header, rows = _read(path, ["y"])
    xcols = _indexed(header, "x")
    if not xcols:
        raise DataError(f"{path}: missing covariate column(s) x1..xd")
    Y = np.array([_num(r, "y", ln) for ln, r in rows])
    X = np.array([[_num(r, c, ln) for c in xcols] for ln, r in rows])
    return RegressionData(X, Y, sigma)


def assess_file(path, kind: str, alpha: float = 0.05, rng: RngStream | None = None,
                **options) -> tuple[AssessmentResult, str]:
    """Read ``path`` as ``kind`` data, run its assessment and format a short report.

    Options: ``postulated`` (pairs), ``family`` (strata), ``t0``, ``mc_B``,
    ``normal_threshold``, ``beta`` (events), ``m_blocks``, ``beta`` (survival).
    """
    rng = rng or rng_stream(1, 0)
    sides = options.get("sides", "two-sided")
    if kind == "pairs":
        postulated = options.get("postulated", "multiplicative")
        res = assess_pairs(read_pairs(path), postulated, alpha, sides)
        title = f"matched pairs, {postulated} model"
    elif kind == "strata":
        family = options.get("family", "normal")
        res = assess_strata(read_strata(path, family), alpha, rng, sides)
        title = f"two-group strata, {family} family"
    elif kind == "events":
        if options.get("t0") is None:
            raise DataError("event data need the observation window t0")
        cohort = read_events(path, float(options["t0"]))
        res = assess_cohort(cohort, alpha, rng, int(options.get("mc_B", 1000)),
                            int(options.get("normal_threshold", 40)), options.get("beta"),
                            sides=sides)
        title = "event histories, log-linear intensity"
    elif kind == "survival":
        data = read_survival(path)
        res = assess_ph(data, int(options.get("m_blocks", 10)), alpha, rng, options.get("beta"), sides)
        title = "survival data, proportional hazards"
    else:
        raise DomainError(f"kind must be one of {FILE_KINDS}")
    return res, format_report(res, title)


def format_report(res: AssessmentResult, title: str) -> str:
    decision = "REJECT" if res.rejected else "no evidence against the model"
    lines = [
        f"{title}: m = {res.m}, alpha = {res.alpha:g}, sides = {res.sides}",
        f"  estimate          {res.psi_tag if res.psi_tag is not None else 'n/a'}",
        f"  R_u    = {res.r_u:12.4f}  p = {res.p_u:.4g}  {'reject' if res.reject_u else 'accept'}",
        f"  R_comp = {res.r_comp:12.4f}  p = {res.p_comp:.4g}  {'reject' if res.reject_comp else 'accept'}",
        f"  decision: {decision}",
    ]
    return "\n".join(lines)
