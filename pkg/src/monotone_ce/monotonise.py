"""Non-decreasing modification of ``Q`` by f0-mass preserving flattening.

Every maximal interval ``]d_l, d_u]`` on which ``Q`` decreases is flattened, from
left to right, to a plateau at level ``q_k``.  To the left of ``d_l`` the
current curve is clipped from above at ``q_k``, to the right of ``d_u`` (up to
the start of the next decreasing interval) ``Q`` is clipped from below, and
``q_k`` is fixed so that the integral of the curve against the null density
up to the next decreasing interval is unchanged.  The result is constant on
plateaus and equal to ``Q`` elsewhere.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .design import ContinuationRegion, DesignSpec, q_function, q_log_derivative
from .numerics import (
    DEFAULT_TOL,
    Tolerance,
    find_root,
    find_threshold,
    integrate,
    std_normal_cdf,
    std_normal_pdf,
)

_SIGN_GRID = 257


@dataclass(frozen=True)
class DecreasingInterval:
    d_l: float
    d_u: float

    def __iter__(self):
        return iter((self.d_l, self.d_u))

    @property
    def width(self) -> float:
        return self.d_u - self.d_l


@dataclass(frozen=True)
class Plateau:
    a: float
    b: float
    level: float


def _kinks(spec: DesignSpec, region: ContinuationRegion) -> list[float]:
    k = spec.kink
    return [k] if k is not None and region.z_lo < k < region.z_hi else []


class RawQ:
    """``Q`` itself, exposed with the same curve protocol as :class:`MonotoneQ`."""

    plateaus: tuple = ()

    def __init__(self, spec: DesignSpec, region: ContinuationRegion):
        self.spec = spec
        self.region = region

    def __call__(self, z1):
        return q_function(z1, self.spec)

    def breakpoints(self) -> list[float]:
        return _kinks(self.spec, self.region)

    def mass(self, lo: float, hi: float, tol: Tolerance = DEFAULT_TOL) -> float:
        return _curve_mass(self, lo, hi, tol)


@dataclass(frozen=True)
class MonotoneQ:
    """A base curve overridden by constant plateaus ``[a_j, b_j]`` (closed at both ends).

    Plateaus are sorted, disjoint and carry strictly increasing levels.
    ``base`` is the original ``Q`` (normally a :class:`RawQ`).
    """

    base: object
    region: ContinuationRegion
    plateaus: tuple[Plateau, ...] = ()
    intervals: tuple[DecreasingInterval, ...] = field(default=(), compare=False)

    @property
    def spec(self) -> DesignSpec | None:
        return getattr(self.base, "spec", None)

    def __call__(self, z1):
        scalar = np.ndim(z1) == 0
        z = np.asarray(z1, dtype=float)
        out = np.asarray(self.base(z), dtype=float)
        if self.plateaus:
            starts = np.array([p.a for p in self.plateaus])
            ends = np.array([p.b for p in self.plateaus])
            levels = np.array([p.level for p in self.plateaus])
            idx = np.searchsorted(starts, z, side="right") - 1
            safe = np.clip(idx, 0, None)
            inside = (idx >= 0) & (z <= ends[safe])
            out = np.where(inside, levels[safe], out)
        return float(out) if scalar else out

    def level_at(self, z1: float) -> float | None:
        """Plateau level covering ``z1``, or None."""
        i = bisect.bisect_right([p.a for p in self.plateaus], z1) - 1
        if i >= 0 and z1 <= self.plateaus[i].b:
            return self.plateaus[i].level
        return None

    def breakpoints(self) -> list[float]:
        pts = list(self.base.breakpoints())
        for p in self.plateaus:
            pts.extend((p.a, p.b))
        return sorted(set(pts))

    def mass(self, lo: float, hi: float, tol: Tolerance = DEFAULT_TOL) -> float:
        """``int_lo^hi curve * phi``."""
        return _curve_mass(self, lo, hi, tol)


def _curve_mass(curve, lo, hi, tol):
    return integrate(lambda z: curve(z) * std_normal_pdf(z), lo, hi, tol,
                     points=curve.breakpoints())


def find_decreasing_intervals(spec: DesignSpec, region: ContinuationRegion,
                              tol: Tolerance = DEFAULT_TOL) -> list[DecreasingInterval]:
    """Maximal intervals of the continuation region on which ``Q`` strictly decreases.

    The region is cut at the truncation kink; on each smooth piece the sign
    changes of ``d/dz log Q`` are bracketed on a grid and refined by root
    finding.  Adjacent decreasing pieces are merged (``Q`` is continuous).
    """
    if not region.z_lo < region.z_hi:
        return []
    edges = [region.z_lo, *_kinks(spec, region), region.z_hi]
    cuts = []
    for p0, p1 in zip(edges[:-1], edges[1:]):
        cuts.append(p0)
        grid = np.linspace(p0, p1, _SIGN_GRID)
        # sample strictly inside the piece so one-sided kink values do not leak
        grid[0] = p0 + 1e-9 * (p1 - p0)
        grid[-1] = p1 - 1e-9 * (p1 - p0)
        g = np.asarray(q_log_derivative(grid, spec))
        s = np.sign(g)
        for i in np.nonzero(s[:-1] * s[1:] < 0)[0]:
            cuts.append(find_root(lambda z: q_log_derivative(z, spec),
                                  grid[i], grid[i + 1], tol.scaled(1e-3)))
        cuts.extend(grid[s == 0])
    cuts.append(region.z_hi)
    cuts.sort()

    intervals: list[DecreasingInterval] = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        if q_log_derivative(0.5 * (lo + hi), spec) < 0:
            if intervals and intervals[-1].d_u == lo:
                intervals[-1] = DecreasingInterval(intervals[-1].d_l, hi)
            else:
                intervals.append(DecreasingInterval(lo, hi))
    return intervals


def flatten_step(prev: MonotoneQ, interval: DecreasingInterval, next_bound: float,
                 tol: Tolerance = DEFAULT_TOL) -> tuple[MonotoneQ, float]:
    """One inductive flattening step over ``interval``.

    ``prev`` must be non-decreasing up to ``interval.d_l``; ``next_bound`` is
    the left end of the next decreasing interval (or ``z_hi``).  Returns the
    new curve and its plateau level.  The f0-mass of the clipped curve on
    ``[z_lo, next_bound]`` is strictly increasing in the level (the interval
    has positive width), so the level preserving that mass is unique and is
    in particular the largest such level.
    """
    d_l, d_u = interval
    z_lo = prev.region.z_lo
    q = prev.base
    if interval.width <= tol.abs_tol:
        return prev, float(q(d_l))

    def extent(level):
        a = find_threshold(prev, level, z_lo, d_l)
        b = find_threshold(q, level, d_u, next_bound)
        for p in prev.plateaus:
            if p.level >= level:
                a = min(a, p.a)
        return a, b

    def residual(level):
        a, b = extent(level)
        return level * (std_normal_cdf(b) - std_normal_cdf(a)) - prev.mass(a, b, tol)

    upper = max(prev(d_l), q(d_l), q(next_bound))
    level = find_root(residual, 0.0, upper, tol)
    a, b = extent(level)
    kept = tuple(p for p in prev.plateaus if p.level < level and p.b <= a)
    curve = MonotoneQ(q, prev.region, kept + (Plateau(a, b, level),), prev.intervals)
    return curve, level


def monotonise_curve(base, region: ContinuationRegion, intervals,
                     tol: Tolerance = DEFAULT_TOL) -> MonotoneQ:
    """Flatten ``base`` over its sorted, disjoint decreasing ``intervals``, left to right."""
    intervals = tuple(intervals)
    curve = MonotoneQ(base, region, (), intervals)
    for k, interval in enumerate(intervals):
        next_bound = intervals[k + 1].d_l if k + 1 < len(intervals) else region.z_hi
        curve, _ = flatten_step(curve, interval, next_bound, tol)
    return curve


def monotonise(spec: DesignSpec, region: ContinuationRegion,
               tol: Tolerance = DEFAULT_TOL) -> MonotoneQ:
    """Non-decreasing modification of the design's ``Q`` over the continuation region."""
    intervals = find_decreasing_intervals(spec, region, tol)
    return monotonise_curve(RawQ(spec, region), region, intervals, tol)


def weighted_pava(y, w):
    """Weighted least-squares non-decreasing fit (pool adjacent violators)."""
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    means, weights, counts = [], [], []
    for yi, wi in zip(y, w):
        m, wt, c = yi, wi, 1
        while means and means[-1] >= m:
            pm, pw, pc = means.pop(), weights.pop(), counts.pop()
            m = (pm * pw + m * wt) / (pw + wt)
            wt += pw
            c += pc
        means.append(m)
        weights.append(wt)
        counts.append(c)
    return np.repeat(means, counts)


def pava_reference(spec: DesignSpec, region: ContinuationRegion, grid_step: float):
    """Isotonic projection of ``Q`` sampled on a grid with weights ``phi(z_i) * step``.

    Returns ``(z, fitted)``.  Independent of the flattening construction; used
    to cross-check :func:`monotonise`.
    """
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    n = int(np.floor(region.width / grid_step + 1e-9)) + 1
    z = region.z_lo + grid_step * np.arange(n)
    fitted = weighted_pava(q_function(z, spec), std_normal_pdf(z) * grid_step)
    return z, fitted


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function: ``values[i]`` on ``[breaks[i-1], breaks[i])``.

    ``values`` has one more entry than ``breaks``.
    """

    breaks: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.breaks) + 1:
            raise ValueError("a step function needs len(values) == len(breaks) + 1")
        if any(b1 < b0 for b0, b1 in zip(self.breaks, self.breaks[1:])):
            raise ValueError("step function breaks must be sorted")

    def __call__(self, x):
        idx = np.searchsorted(np.asarray(self.breaks), np.asarray(x, dtype=float), side="right")
        return np.asarray(self.values)[idx]

    @property
    def is_non_increasing(self) -> bool:
        return all(v1 <= v0 for v0, v1 in zip(self.values, self.values[1:]))


def verify_lemma1(spec: DesignSpec, region: ContinuationRegion, eta: StepFunction, xi,
                  curve: MonotoneQ | None = None, tol: Tolerance = DEFAULT_TOL):
    """Check the two integral relations between ``Q`` and its modification.

    Returns ``(d10, d11)`` with

    * ``d10 = int eta Q phi - int eta Qmod phi`` for a non-increasing,
      non-negative step function ``eta`` (should be >= 0), and
    * ``d11 = |int xi(Qmod) Q phi - int xi(Qmod) Qmod phi|`` for any vectorised
      ``xi`` (should vanish).  It is integrated as the single integral of
      ``xi(Qmod) (Q - Qmod) phi``, which is smooth between plateau ends even
      where ``xi`` jumps.
    """
    if not eta.is_non_increasing or min(eta.values) < 0:
        raise ValueError("eta must be non-increasing and non-negative")
    curve = curve if curve is not None else monotonise(spec, region, tol)
    z_lo, z_hi = region.z_lo, region.z_hi
    pts = curve.breakpoints()
    eta_pts = pts + [b for b in eta.breaks if z_lo < b < z_hi]

    q = curve.base
    lhs = integrate(lambda z: eta(z) * q(z) * std_normal_pdf(z), z_lo, z_hi, tol, eta_pts)
    rhs = integrate(lambda z: eta(z) * curve(z) * std_normal_pdf(z), z_lo, z_hi, tol, eta_pts)

    def gap(z):
        qm = curve(z)
        return np.asarray(xi(qm), dtype=float) * (q(z) - qm) * std_normal_pdf(z)

    d11 = abs(integrate(gap, z_lo, z_hi, tol, pts))
    return lhs - rhs, d11
