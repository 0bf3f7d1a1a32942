"""Type I error audit over the composite null ``delta <= 0``.

For ``delta < 0`` the likelihood ratio ``phi(z1 - theta) / phi(z1)`` decreases on
the whole continuation region, so its monotone modification is the pooled
constant ``q1``.  Any non-decreasing, level-calibrated conditional error
function then satisfies

    P_delta(reject) <= Phi(theta - z_{alpha1}) + int alpha2 Q phi            (b1)
                    <= Phi(theta - z_{alpha1}) + q1 (alpha - alpha1)         (b2)
                    <= alpha1 (alpha0 - alpha)/(alpha0 - alpha1)
                       + alpha0 (alpha - alpha1)/(alpha0 - alpha1) = alpha   (b3)
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .ce import second_stage_n
from .design import DesignSpec, continuation_region, likelihood_ratio
from .numerics import DEFAULT_TOL, Tolerance, integrate, std_normal_cdf, std_normal_pdf, upper_quantile

_MONOTONE_GRID = 2001


@dataclass(frozen=True)
class Type1Row:
    delta: float
    first_stage_reject: float
    second_stage_mass: float
    exact_total: float
    bound_total: float

    def to_dict(self) -> dict:
        return asdict(self)


def _shift(spec: DesignSpec, delta: float) -> float:
    return math.sqrt(spec.n1 / 2.0) * delta


def pooled_q1(spec: DesignSpec, delta: float) -> float:
    """Closed-form f0-mean of the likelihood ratio at ``delta`` over the region."""
    if not delta < 0:
        raise ValueError(f"pooled_q1 needs delta < 0 (whole-region decrease), got {delta}")
    region = continuation_region(spec)
    t = _shift(spec, delta)
    num = std_normal_cdf(t - region.z_lo) - std_normal_cdf(t - region.z_hi)
    return float(num / (spec.alpha0 - spec.alpha1))


def _points(ce) -> list[float]:
    return list(ce.breakpoints()) if hasattr(ce, "breakpoints") else []


def _require_monotone(ce, spec: DesignSpec) -> None:
    region = continuation_region(spec)
    z = np.linspace(region.z_lo, region.z_hi, _MONOTONE_GRID)
    v = np.asarray(ce(z), dtype=float)
    if np.any(np.diff(v) < -1e-12):
        raise ValueError("conditional error function must be non-decreasing")


def keyiq_check(ce, spec: DesignSpec, delta: float, tol: Tolerance = DEFAULT_TOL) -> float:
    """Slack ``q1 int alpha2 phi - int alpha2 Q phi`` (non-negative for monotone ``ce``)."""
    if not delta < 0:
        raise ValueError("keyiq_check needs delta < 0")
    _require_monotone(ce, spec)
    region = continuation_region(spec)
    pts = _points(ce)
    null = integrate(lambda z: ce(z) * std_normal_pdf(z), region.z_lo, region.z_hi, tol, pts)
    weighted = integrate(lambda z: ce(z) * likelihood_ratio(z, spec, delta) * std_normal_pdf(z),
                         region.z_lo, region.z_hi, tol, pts)
    return pooled_q1(spec, delta) * null - weighted


def exact_rejection(ce, spec: DesignSpec, delta: float, tol: Tolerance = DEFAULT_TOL) -> float:
    """``P_delta(reject H0)`` with the second-stage size from the recalculation rule.

    The second-stage z-statistic is normal with mean ``sqrt(n2(z1)/2) delta``.
    """
    return sum(_rejection_parts(ce, spec, delta, tol))


def _rejection_parts(ce, spec, delta, tol):
    region = continuation_region(spec)
    t = _shift(spec, delta)
    first = float(std_normal_cdf(t - region.z_hi))
    pts = _points(ce) + ([spec.kink] if spec.kink is not None else [])

    def conditional(z):
        a2 = ce(z)
        n2 = second_stage_n(ce, z, spec)
        return std_normal_cdf(np.sqrt(n2 / 2.0) * delta - upper_quantile(a2)) * std_normal_pdf(z - t)

    second = integrate(conditional, region.z_lo, region.z_hi, tol, pts)
    return first, second


def bound_chain(ce, spec: DesignSpec, delta: float, tol: Tolerance = DEFAULT_TOL):
    """The three successive upper bounds ``(b1, b2, b3)`` on the rejection probability."""
    if not delta < 0:
        raise ValueError("bound_chain needs delta < 0")
    _require_monotone(ce, spec)
    region = continuation_region(spec)
    t = _shift(spec, delta)
    first = float(std_normal_cdf(t - region.z_hi))
    weighted = integrate(lambda z: ce(z) * likelihood_ratio(z, spec, delta) * std_normal_pdf(z),
                         region.z_lo, region.z_hi, tol, _points(ce))
    a, a0, a1 = spec.alpha, spec.alpha0, spec.alpha1
    b1 = first + weighted
    b2 = first + pooled_q1(spec, delta) * (a - a1)
    b3 = a1 * (a0 - a) / (a0 - a1) + a0 * (a - a1) / (a0 - a1)
    return b1, b2, b3


def type1_scan(ce, spec: DesignSpec, deltas, tol: Tolerance = DEFAULT_TOL) -> list[Type1Row]:
    """One audit row per ``delta``; the bound column is ``b2`` (``alpha`` at ``delta = 0``)."""
    deltas = [float(d) for d in deltas]
    if any(d > 0 for d in deltas):
        raise ValueError("type1_scan covers the null delta <= 0 only")
    if any(d1 < d0 for d0, d1 in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be sorted")
    if deltas:
        _require_monotone(ce, spec)
    rows = []
    for d in deltas:
        first, second = _rejection_parts(ce, spec, d, tol)
        bound = bound_chain(ce, spec, d, tol)[1] if d < 0 else spec.alpha
        rows.append(Type1Row(d, first, second, first + second, bound))
    return rows

