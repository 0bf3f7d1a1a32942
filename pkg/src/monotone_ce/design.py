"""First-stage model of a two-arm normal design with unit variance.

The interim data are summarised by the first-stage z-score ``Z1`` which, with
``n1`` patients per group, is normal with mean ``sqrt(n1/2) * delta`` and unit
variance.  ``Q(z1) = l(z1) / effect(z1)`` combines the likelihood ratio of the
design alternative against the null with the interim effect estimate used
for sample size recalculation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .errors import SpecError
from .numerics import std_normal_cdf, upper_quantile

BETA_C_MIN = float(std_normal_cdf(-2.0))
BETA_C_MAX = float(std_normal_cdf(2.0))


class EstimateRule(str, Enum):
    FIXED = "fixed"
    TRUNCATED_OBSERVED = "truncated-observed"


@dataclass(frozen=True)
class DesignSpec:
    """Design constants.

    Attributes:
        alpha: overall one-sided significance level.
        alpha0: futility level; the trial stops for futility when ``z1 <= z_{alpha0}``.
        alpha1: early rejection level; rejection at stage one when ``z1 > z_{alpha1}``.
        beta_c: conditional type II error; the recalculation targets power ``1 - beta_c``.
        n1: first-stage sample size per group.
        delta_a: standardised effect of the density ``f`` in the likelihood ratio.
        delta_min: lower truncation (or the fixed value) of the interim effect estimate.
        estimate_rule: ``fixed`` or ``truncated-observed``.
    """

    alpha: float = 0.025
    alpha0: float = 0.5
    alpha1: float = 0.01
    beta_c: float = 0.2
    n1: float = 50.0
    delta_a: float = 0.3
    delta_min: float = 0.15
    estimate_rule: EstimateRule = EstimateRule.TRUNCATED_OBSERVED

    def __post_init__(self):
        object.__setattr__(self, "estimate_rule", _rule(self.estimate_rule))
        for name in ("alpha", "alpha0", "alpha1", "beta_c", "n1", "delta_a", "delta_min"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise SpecError(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise SpecError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if not 0.0 < self.alpha1 < self.alpha < self.alpha0 < 1.0:
            raise SpecError(
                "levels must satisfy 0 < alpha1 < alpha < alpha0 < 1, got "
                f"alpha1={self.alpha1}, alpha={self.alpha}, alpha0={self.alpha0}"
            )
        if not BETA_C_MIN <= self.beta_c <= BETA_C_MAX:
            raise SpecError(
                f"beta_c={self.beta_c} outside [1 - Phi(2), Phi(2)] = "
                f"[{BETA_C_MIN:.5f}, {BETA_C_MAX:.5f}]; nu2' is only guaranteed "
                "increasing (and psi well defined) on that range"
            )
        if not self.n1 > 0:
            raise SpecError(f"n1 must be > 0, got {self.n1}")
        if not self.delta_min > 0:
            raise SpecError(f"delta_min must be > 0, got {self.delta_min}")

    @property
    def theta(self) -> float:
        """Mean of ``Z1`` under ``delta_a``."""
        return math.sqrt(self.n1 / 2.0) * self.delta_a

    @property
    def kink(self) -> float | None:
        """z-score where the truncated observed estimate leaves ``delta_min``."""
        if self.estimate_rule is EstimateRule.FIXED:
            return None
        return self.delta_min * math.sqrt(self.n1 / 2.0)

    def replace(self, **changes) -> "DesignSpec":
        fields = self.to_dict()
        fields.update(changes)
        return DesignSpec(**fields)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimate_rule"] = self.estimate_rule.value
        return d


def _rule(value) -> EstimateRule:
    try:
        return EstimateRule(value)
    except ValueError:
        choices = ", ".join(r.value for r in EstimateRule)
        raise SpecError(f"estimate_rule must be one of {{{choices}}}, got {value!r}") from None


@dataclass(frozen=True)
class ContinuationRegion:
    """First-stage z-scores ``]z_lo, z_hi]`` leading to a second stage."""

    z_lo: float
    z_hi: float

    @property
    def width(self) -> float:
        return self.z_hi - self.z_lo

    def null_mass(self) -> float:
        """``P_0(z_lo < Z1 <= z_hi)``."""
        return float(std_normal_cdf(self.z_hi) - std_normal_cdf(self.z_lo))

    def contains(self, z1, slack: float = 1e-12) -> bool:
        z1 = np.asarray(z1, dtype=float)
        return bool(np.all((z1 >= self.z_lo - slack) & (z1 <= self.z_hi + slack)))


def continuation_region(spec: DesignSpec) -> ContinuationRegion:
    if not 0.0 < spec.alpha1 < spec.alpha0 < 1.0:
        raise SpecError("continuation region needs 0 < alpha1 < alpha0 < 1")
    return ContinuationRegion(upper_quantile(spec.alpha0), upper_quantile(spec.alpha1))


def likelihood_ratio(z1, spec: DesignSpec, delta: float | None = None):
    """``phi(z1 - theta) / phi(z1)`` with ``theta = sqrt(n1/2) * delta``.

    ``delta`` defaults to ``spec.delta_a``.
    """
    theta = spec.theta if delta is None else math.sqrt(spec.n1 / 2.0) * delta
    return np.exp(theta * np.asarray(z1, dtype=float) - 0.5 * theta * theta)


def interim_estimate(z1, spec: DesignSpec):
    z1 = np.asarray(z1, dtype=float)
    if spec.estimate_rule is EstimateRule.FIXED:
        return np.full_like(z1, spec.delta_min)
    return np.maximum(spec.delta_min, z1 * math.sqrt(2.0 / spec.n1))


def q_function(z1, spec: DesignSpec):
    """``Q(z1) = l(z1) / effect(z1)``; a float for scalar input."""
    q = likelihood_ratio(z1, spec) / interim_estimate(z1, spec)
    return float(q) if np.ndim(z1) == 0 else q


def q_log_derivative(z1, spec: DesignSpec):
    """``d/dz log Q``; right-hand derivative at the truncation kink."""
    z1 = np.asarray(z1, dtype=float)
    slope = np.full_like(z1, spec.theta)
    kink = spec.kink
    if kink is not None:
        above = z1 >= kink
        slope = np.where(above, spec.theta - 1.0 / np.where(above, z1, 1.0), slope)
    return float(slope) if slope.ndim == 0 else slope


def q_derivative_sign(z1, spec: DesignSpec) -> int:
    """Sign of ``Q'(z1)`` from the closed-form log-derivative.

    At the truncation kink the right-hand sign is reported.
    """
    return int(np.sign(q_log_derivative(float(z1), spec)))
