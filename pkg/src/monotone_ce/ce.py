"""Conditional error functions of the form ``psi(-exp(c) / curve(z1))``.

Minimising ``int nu2(alpha2) Q phi`` subject to the level condition
``int alpha2 phi = alpha - alpha1`` over the continuation region gives this
family with the Lagrange multiplier ``exp(c)``.  Plugging in the raw ``Q``
gives the unconstrained optimum; plugging in the monotonised ``Q`` gives the
optimum among non-decreasing conditional error functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .design import ContinuationRegion, DesignSpec, continuation_region, interim_estimate, q_function
from .errors import ConvergenceError, InfeasibleLevelError
from .monotonise import MonotoneQ, RawQ, monotonise
from .numerics import (
    DEFAULT_TOL,
    Tolerance,
    find_root,
    integrate,
    std_normal_cdf,
    std_normal_pdf,
    upper_quantile,
)
from .nupsi import PsiContext, nu2, nu2_prime, psi

_MAX_EXPANSIONS = 80


@dataclass(frozen=True)
class ConstantCurve:
    """A flat curve; every c gives a constant conditional error function."""

    value: float
    region: ContinuationRegion

    def __call__(self, z1):
        return np.full(np.shape(z1), self.value) if np.ndim(z1) else self.value

    def breakpoints(self) -> list[float]:
        return []


@dataclass(frozen=True)
class PiecewiseLinearCurve:
    """Linear interpolation through ``(knots[i], values[i])``, flat outside."""

    knots: tuple[float, ...]
    values: tuple[float, ...]

    def __call__(self, z1):
        out = np.interp(z1, self.knots, self.values)
        return float(out) if np.ndim(z1) == 0 else out

    def breakpoints(self) -> list[float]:
        return list(self.knots)


def random_monotone_curve(rng: np.random.Generator, region: ContinuationRegion,
                          n_knots: int | None = None) -> PiecewiseLinearCurve:
    """Random positive non-decreasing piecewise-linear curve over the region."""
    n = int(n_knots if n_knots is not None else rng.integers(2, 9))
    inner = np.sort(rng.uniform(region.z_lo, region.z_hi, size=max(n - 2, 0)))
    knots = np.concatenate([[region.z_lo], inner, [region.z_hi]])
    steps = rng.exponential(rng.uniform(0.05, 2.0), size=n)
    steps[0] = 0.0
    # occasional flat stretches
    steps[rng.random(n) < 0.2] = 0.0
    values = np.exp(np.cumsum(steps) + rng.normal(0.0, 2.0))
    return PiecewiseLinearCurve(tuple(knots), tuple(values))


@dataclass(frozen=True)
class CEFunction:
    """``z1 -> psi(-exp(c) / curve(z1))`` on the continuation region."""

    curve: object
    c: float
    ctx: PsiContext
    region: ContinuationRegion

    def __call__(self, z1):
        return ce_value(self, z1)

    def with_c(self, c: float) -> "CEFunction":
        return CEFunction(self.curve, c, self.ctx, self.region)

    def breakpoints(self) -> list[float]:
        return list(self.curve.breakpoints())

    def _unchecked(self, z1):
        with np.errstate(over="ignore", divide="ignore"):
            y = -np.exp(self.c - np.log(self.curve(z1)))
        return psi(y, self.ctx)


@dataclass(frozen=True)
class CalibrationResult:
    c_alpha: float
    achieved_level: float
    iterations: int


def ce_value(cef: CEFunction, z1):
    if not cef.region.contains(z1):
        raise ValueError(f"z1 outside the continuation region ]{cef.region.z_lo}, {cef.region.z_hi}]")
    return cef._unchecked(z1)


def level(cef: CEFunction, tol: Tolerance = DEFAULT_TOL) -> float:
    """Null probability of second-stage rejection, ``int alpha2 phi`` over the region."""
    r = cef.region
    return integrate(lambda z: cef._unchecked(z) * std_normal_pdf(z), r.z_lo, r.z_hi, tol,
                     cef.breakpoints())


def level_target(spec: DesignSpec) -> float:
    return spec.alpha - spec.alpha1


def calibrate(curve, spec: DesignSpec, tol: Tolerance = DEFAULT_TOL) -> CalibrationResult:
    """Find ``c`` with ``level = alpha - alpha1``.

    The level is continuous and strictly decreasing in ``c`` (from
    ``(1 - beta_c) P_0(region)`` to 0), so a bracket is grown geometrically
    from ``c = 0`` and the root refined with Brent's method.  ``c`` is located
    to ``abs_tol * 1e-3`` so the level residual stays far below ``abs_tol``.
    """
    region = continuation_region(spec)
    ctx = PsiContext(spec.beta_c)
    target = level_target(spec)
    supremum = ctx.u_max * region.null_mass()
    if target >= supremum:
        raise InfeasibleLevelError(target, supremum)

    base = CEFunction(curve, 0.0, ctx, region)
    calls = 0

    def excess(c):
        nonlocal calls
        calls += 1
        return level(base.with_c(c), tol) - target

    lo, hi = 0.0, 0.0
    h0 = excess(0.0)
    step = 1.0
    for _ in range(_MAX_EXPANSIONS):
        if h0 > 0:
            lo, hi = hi, hi + step
            if excess(hi) <= 0:
                break
        else:
            lo, hi = lo - step, lo
            if excess(lo) >= 0:
                break
        step *= 2.0
    else:
        raise ConvergenceError("calibrate: could not bracket the level target")
    c_alpha = find_root(excess, lo, hi, tol.scaled(1e-3))
    achieved = level(base.with_c(c_alpha), tol)
    return CalibrationResult(c_alpha, achieved, calls)


def calibrated_ce(curve, spec: DesignSpec, tol: Tolerance = DEFAULT_TOL) -> CEFunction:
    result = calibrate(curve, spec, tol)
    return CEFunction(curve, result.c_alpha, PsiContext(spec.beta_c), continuation_region(spec))


def optimal_ce(spec: DesignSpec, tol: Tolerance = DEFAULT_TOL,
               curve: MonotoneQ | None = None) -> CEFunction:
    """Level-calibrated optimal non-decreasing conditional error function."""
    curve = curve if curve is not None else monotonise(spec, continuation_region(spec), tol)
    return calibrated_ce(curve, spec, tol)


def unconstrained_ce(spec: DesignSpec, tol: Tolerance = DEFAULT_TOL) -> CEFunction:
    """Calibrated optimum over the raw ``Q`` (may be non-monotone)."""
    return calibrated_ce(RawQ(spec, continuation_region(spec)), spec, tol)


def flat_ce(spec: DesignSpec, tol: Tolerance = DEFAULT_TOL) -> CEFunction:
    """Constant conditional error ``(alpha - alpha1) / (alpha0 - alpha1)``, via calibration."""
    return calibrated_ce(ConstantCurve(1.0, continuation_region(spec)), spec, tol)


def constant_curve_c(q_level: float, spec: DesignSpec) -> float:
    """Closed-form ``c`` for a constant curve: ``log(-q nu2'(level / P_0(region)))``."""
    u = level_target(spec) / (spec.alpha0 - spec.alpha1)
    return math.log(-q_level * nu2_prime(u, PsiContext(spec.beta_c)))


def _points(ce) -> list[float]:
    return list(ce.breakpoints()) if hasattr(ce, "breakpoints") else []


def objective(ce, spec: DesignSpec, tol: Tolerance = DEFAULT_TOL, points=()) -> float:
    """``int nu2(ce(z1)) Q(z1) phi(z1)`` over the region, weighted by the raw ``Q``."""
    region = continuation_region(spec)
    ctx = PsiContext(spec.beta_c)
    pts = _points(ce) + list(points)
    if spec.kink is not None:
        pts.append(spec.kink)
    return integrate(lambda z: nu2(ce(z), ctx) * q_function(z, spec) * std_normal_pdf(z),
                     region.z_lo, region.z_hi, tol, pts)


def second_stage_n(cef, z1, spec: DesignSpec):
    """Per-group second-stage size giving conditional power ``1 - beta_c`` at the interim estimate."""
    effect = interim_estimate(z1, spec)
    n2 = nu2(cef(z1), PsiContext(spec.beta_c)) / (effect * effect)
    return float(n2) if np.ndim(z1) == 0 else n2


def conditional_power(alpha2, n2, effect):
    """``1 - Phi(z_{alpha2} - sqrt(n2/2) effect)``."""
    out = std_normal_cdf(np.sqrt(np.asarray(n2) / 2.0) * effect - upper_quantile(alpha2))
    return float(out) if np.ndim(out) == 0 else out


def expected_sample_size(cef, spec: DesignSpec, effect: float,
                         tol: Tolerance = DEFAULT_TOL) -> float:
    """``n1 + E_effect[n2(Z1); Z1 in region]`` (per group)."""
    region = continuation_region(spec)
    shift = math.sqrt(spec.n1 / 2.0) * effect
    pts = _points(cef) + ([spec.kink] if spec.kink is not None else [])
    extra = integrate(lambda z: second_stage_n(cef, z, spec) * std_normal_pdf(z - shift),
                      region.z_lo, region.z_hi, tol, pts)
    return spec.n1 + extra
