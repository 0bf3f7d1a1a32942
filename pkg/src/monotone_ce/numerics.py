"""Normal distribution helpers, adaptive quadrature and bracketed root finding.

All functions accept scalars or numpy arrays where noted; scalar input gives a
plain ``float`` back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import BracketError, ConvergenceError, NumericalError

# |z| beyond this carries standard normal density < 1e-16
Z_INFINITY = 8.5

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)
_MAX_PANELS = 1 << 16


@dataclass(frozen=True)
class Tolerance:
    """Accuracy settings for quadrature and root finding.

    ``abs_tol`` bounds the total quadrature error and the final root bracket
    width, ``rel_tol`` is the per-panel relative acceptance level of the
    quadrature, and ``max_iter`` caps refinement levels / root iterations.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError(f"abs_tol must be > 0, got {self.abs_tol}")
        if not self.rel_tol >= 0:
            raise ValueError(f"rel_tol must be >= 0, got {self.rel_tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")

    def scaled(self, factor: float) -> "Tolerance":
        return Tolerance(self.abs_tol * factor, self.rel_tol, self.max_iter)


DEFAULT_TOL = Tolerance()


def _out(x, scalar):
    return float(x) if scalar else x


def std_normal_pdf(x):
    """Standard normal density."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    return _out(np.exp(-0.5 * x * x) / _SQRT_2PI, scalar)


def std_normal_cdf(x):
    """Standard normal distribution function (accepts +-inf)."""
    scalar = np.ndim(x) == 0
    return _out(special.ndtr(np.asarray(x, dtype=float)), scalar)


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` for ``0 < p < 1``.

    A starting value from the inverse error function is polished by Newton
    steps on the lower-tail cdf so that ``std_normal_cdf(std_normal_quantile(p))``
    reproduces ``p`` to rounding.
    """
    scalar = np.ndim(p) == 0
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise ValueError("std_normal_quantile requires 0 < p < 1")
    lower = p < 0.5
    q = np.where(lower, p, 1.0 - p)  # exact for p >= 0.5
    t = special.ndtri(q)
    for _ in range(2):
        t = t - (special.ndtr(t) - q) / std_normal_pdf(t)
    x = np.where(lower, t, -t)
    return _out(x, scalar)


def upper_quantile(u):
    """``z_u``, the upper ``u`` percentile ``Phi^{-1}(1 - u)``, without forming ``1 - u``."""
    scalar = np.ndim(u) == 0
    return _out(-np.asarray(std_normal_quantile(u)), scalar)


def _finite(x):
    return float(np.clip(x, -Z_INFINITY, Z_INFINITY))


def integrate(f, a, b, tol: Tolerance = DEFAULT_TOL, points=()):
    """Adaptive Gauss-Legendre quadrature of a vectorised integrand over ``[a, b]``.

    ``f`` must map a 1-d array of abscissae to an array of values.  The range
    is first cut at every abscissa in ``points`` lying inside ``(a, b)`` (use
    this for kinks and jumps).  Each panel is compared against its two halves;
    panels whose discrepancy exceeds their share of ``tol.abs_tol`` (or
    ``tol.rel_tol`` relative) are halved again, for at most ``tol.max_iter``
    levels.  Infinite limits are truncated at ``+-Z_INFINITY``.
    """
    a, b = _finite(a), _finite(b)
    if a > b:
        raise ValueError(f"integrate requires a <= b, got [{a}, {b}]")
    if a == b:
        return 0.0
    cuts = sorted({a, b, *(float(p) for p in points if a < p < b)})
    lo = np.asarray(cuts[:-1])
    hi = np.asarray(cuts[1:])
    span = b - a
    total = 0.0
    for _ in range(int(tol.max_iter)):
        mid = 0.5 * (lo + hi)
        whole = _gauss(f, lo, hi)
        halves = _gauss(f, lo, mid) + _gauss(f, mid, hi)
        if not np.all(np.isfinite(halves)):
            raise NumericalError("integrand returned non-finite values")
        allow = np.maximum(tol.abs_tol * (hi - lo) / span, tol.rel_tol * np.abs(halves))
        done = np.abs(whole - halves) <= allow
        total += float(np.sum(halves[done]))
        if done.all():
            return total
        lo, mid, hi = lo[~done], mid[~done], hi[~done]
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        if lo.size > _MAX_PANELS:
            break
    raise ConvergenceError(
        f"quadrature on [{a}, {b}] did not converge within {tol.max_iter} refinements"
    )


def _gauss(f, lo, hi):
    half = 0.5 * (hi - lo)
    centre = 0.5 * (hi + lo)
    x = centre[:, None] + half[:, None] * _GL_NODES[None, :]
    y = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    return half * (y @ _GL_WEIGHTS)


def find_root(f, lo, hi, tol: Tolerance = DEFAULT_TOL):
    """Root of a scalar continuous function bracketed by ``[lo, hi]`` (Brent's method).

    Raises BracketError when ``f(lo)`` and ``f(hi)`` share a strict sign.
    The returned root is located to a bracket of width ``tol.abs_tol``.
    """
    lo, hi = float(lo), float(hi)
    if lo > hi:
        lo, hi = hi, lo
    flo, fhi = float(f(lo)), float(f(hi))
    if math.isnan(flo) or math.isnan(fhi):
        raise NumericalError("function is NaN at a bracket end")
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f = ({flo:.3g}, {fhi:.3g})")
    try:
        root, info = optimize.brentq(
            f, lo, hi, xtol=tol.abs_tol, maxiter=int(tol.max_iter),
            full_output=True, disp=False,
        )
    except ValueError as exc:  # NaN during iteration
        raise NumericalError(str(exc)) from exc
    if not info.converged:
        raise ConvergenceError(f"root finding on [{lo}, {hi}] did not converge: {info.flag}")
    return float(root)


def find_threshold(g, level, lo, hi):
    """``inf{x in [lo, hi] : g(x) >= level}`` for a non-decreasing ``g`` (bisection).

    Returns ``lo`` when ``g(lo) >= level`` and ``hi`` when the level is never
    reached.  Bisects down to adjacent floats, so flat stretches where Brent's
    method would be ambiguous are handled.
    """
    if g(lo) >= level:
        return float(lo)
    if g(hi) < level:
        return float(hi)
    for _ in range(2100):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) >= level:
            hi = mid
        else:
            lo = mid
    return float(hi)
