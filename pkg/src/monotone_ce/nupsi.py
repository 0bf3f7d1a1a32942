"""Second-stage cost ``nu2`` and the inverse ``psi`` of its derivative.

``nu2(u) = 2 (z_u - z_{1-beta_c})**2`` is proportional to the second-stage
sample size needed for conditional power ``1 - beta_c`` when the second stage
is tested at level ``u``.  Its derivative is

    nu2'(u) = -4 (z_u - z_{1-beta_c}) / phi(z_u),

which is increasing in ``u`` whenever ``|z_{1-beta_c}| < 2``.  ``psi`` inverts
it on the branch ``u <= 1 - beta_c`` (non-positive slopes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .design import BETA_C_MAX, BETA_C_MIN
from .errors import ConvergenceError, SpecError
from .numerics import std_normal_cdf, std_normal_pdf, std_normal_quantile, upper_quantile

U_FLOOR = 1e-10
_LOG_4SQRT2PI = math.log(4.0 * math.sqrt(2.0 * math.pi))


@dataclass(frozen=True)
class PsiContext:
    beta_c: float
    u_floor: float = U_FLOOR

    def __post_init__(self):
        if not BETA_C_MIN <= self.beta_c <= BETA_C_MAX:
            raise SpecError(f"beta_c={self.beta_c} outside [1 - Phi(2), Phi(2)]")
        if not 0.0 < self.u_floor <= 1e-6:
            raise SpecError(f"u_floor must lie in (0, 1e-6], got {self.u_floor}")

    @property
    def z_target(self) -> float:
        """``z_{1-beta_c} = Phi^{-1}(beta_c)``."""
        return std_normal_quantile(self.beta_c)

    @property
    def u_max(self) -> float:
        """``1 - beta_c``, where ``nu2`` vanishes."""
        return 1.0 - self.beta_c


def _check_u(u):
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise ValueError("conditional error level must lie in (0, 1)")
    return u


def nu2(u, ctx: PsiContext):
    scalar = np.ndim(u) == 0
    d = upper_quantile(_check_u(u)) - ctx.z_target
    out = 2.0 * d * d
    return float(out) if scalar else out


def nu2_prime(u, ctx: PsiContext):
    scalar = np.ndim(u) == 0
    z = upper_quantile(_check_u(u))
    out = -4.0 * (z - ctx.z_target) / std_normal_pdf(z)
    return float(out) if scalar else out


def psi(y, ctx: PsiContext, max_iter: int = 100):
    """Solve ``nu2_prime(u) = y`` for ``u`` in ``[u_floor, 1 - beta_c]``.

    Works on the z-scale: with ``z = z_u`` the equation reads
    ``log(z - z_t) + z**2/2 + log(4 sqrt(2 pi)) = log(-y)``, whose left side is
    increasing for ``z > z_t``.  Newton steps are safeguarded by bisection on
    the running bracket.  Slopes below ``nu2_prime(u_floor)`` (including
    ``-inf``) are clamped to ``u_floor``.
    """
    scalar = np.ndim(y) == 0
    y = np.asarray(y, dtype=float)
    if np.any(y > 0) or np.any(np.isnan(y)):
        raise ValueError("psi is defined on non-positive slopes only")
    zt = ctx.z_target
    z_cap = upper_quantile(ctx.u_floor)
    u = np.full(y.shape, ctx.u_max)

    with np.errstate(divide="ignore"):
        target = np.log(-y)  # -inf at y == 0
    cap_value = math.log(z_cap - zt) + 0.5 * z_cap * z_cap + _LOG_4SQRT2PI
    clamped = target >= cap_value
    u[clamped] = ctx.u_floor
    active = (y < 0) & ~clamped
    if np.any(active):
        t = target[active]
        lo = np.full(t.shape, zt)
        hi = np.full(t.shape, z_cap)
        # start from the larger of the two asymptotic regimes
        z = np.maximum(zt + np.exp(t - _LOG_4SQRT2PI - 0.5 * zt * zt),
                       np.sqrt(np.maximum(2.0 * t, 0.0)))
        z = np.clip(z, np.nextafter(zt, np.inf), z_cap)
        # z may round onto z_t for vanishing slopes; the bisection fallback absorbs the NaN step
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for _ in range(max_iter):
                g = np.log(z - zt) + 0.5 * z * z + _LOG_4SQRT2PI - t
                lo = np.where(g < 0, z, lo)
                hi = np.where(g > 0, z, hi)
                step = g / (1.0 / (z - zt) + z)
                z_new = z - step
                bad = ~((z_new > lo) & (z_new < hi))
                z_new = np.where(bad, 0.5 * (lo + hi), z_new)
                if np.all((np.abs(z_new - z) <= 4e-16 * np.maximum(1.0, np.abs(z))) | (g == 0)):
                    z = z_new
                    break
                z = z_new
            else:
                raise ConvergenceError("psi: Newton iteration did not converge")
        u[active] = np.minimum(std_normal_cdf(-z), ctx.u_max)
    return float(u) if scalar else u
