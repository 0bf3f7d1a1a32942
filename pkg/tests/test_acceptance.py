"""Acceptance suite: one test per criterion, each recorded as a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py``; the per-criterion summary is
printed at the end of the session.  Oracles are kept independent of the
package's own quadrature where possible (scipy ``quad``, mpmath, exact
rational arithmetic).
"""

import json
import math
import time
import warnings
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad

from conftest import random_spec, spec_with_interval
from monotone_ce.ce import (
    PiecewiseLinearCurve,
    calibrated_ce,
    conditional_power,
    flat_ce,
    objective,
    optimal_ce,
    random_monotone_curve,
    second_stage_n,
    unconstrained_ce,
)
from monotone_ce.cli import main
from monotone_ce.design import (
    DesignSpec,
    continuation_region,
    interim_estimate,
    q_function,
    q_log_derivative,
)
from monotone_ce.monotonise import StepFunction, find_decreasing_intervals, monotonise, pava_reference, verify_lemma1
from monotone_ce.numerics import std_normal_cdf, std_normal_pdf
from monotone_ce.nupsi import PsiContext, nu2_prime, psi
from monotone_ce.report import REPORT_DIR_ENV, REPORT_FIELDS
from monotone_ce.type1 import bound_chain, exact_rejection

SUITE_BUDGET = 60.0
SEED = 20261015


def within_budget(start):
    elapsed = time.perf_counter() - start
    assert elapsed <= SUITE_BUDGET, f"suite took {elapsed:.1f} s"


def quad_mass(f, a, b, points=()):
    pts = sorted(p for p in points if a < p < b)
    val, _ = quad(lambda z: f(z) * std_normal_pdf(z), a, b, points=pts or None,
                  epsabs=1e-14, epsrel=1e-13, limit=400)
    return val


@pytest.fixture(scope="module")
def designs():
    """100 randomized specs with their monotone and unconstrained solutions."""
    rng = np.random.default_rng(SEED)
    out = []
    for i in range(100):
        spec = spec_with_interval(rng) if i % 4 == 0 else random_spec(rng)
        region = continuation_region(spec)
        curve = monotonise(spec, region)
        out.append((spec, region, curve, optimal_ce(spec, curve=curve), unconstrained_ce(spec)))
    return out


# 1
def test_monotonisation_correctness(designs, criterion):
    with criterion(1, "monotonisation: monotone, mass-preserving, plateau means"):
        start = time.perf_counter()
        rng = np.random.default_rng(SEED + 1)
        for spec, region, curve, _, _ in designs:
            z = np.linspace(region.z_lo, region.z_hi, 10_000)
            assert np.min(np.diff(curve(z))) >= -1e-10
            pts = curve.breakpoints()
            raw = lambda t: float(q_function(t, spec))
            mono = lambda t: float(curve(t))
            total = quad_mass(raw, region.z_lo, region.z_hi, pts)
            assert abs(quad_mass(mono, region.z_lo, region.z_hi, pts) - total) <= 1e-8
            # prefix mass is preserved at every point outside the plateau interiors
            cuts = [p.a for p in curve.plateaus] + [p.b for p in curve.plateaus]
            cuts += [t for t in rng.uniform(region.z_lo, region.z_hi, 8) if curve.level_at(t) is None]
            for t in cuts:
                assert abs(quad_mass(mono, region.z_lo, t, pts) - quad_mass(raw, region.z_lo, t, pts)) <= 1e-8
            for p in curve.plateaus:
                mean = quad_mass(raw, p.a, p.b, pts) / (std_normal_cdf(p.b) - std_normal_cdf(p.a))
                assert abs(mean - p.level) <= 1e-8
        within_budget(start)


# 2
def random_eta(rng, region):
    k = int(rng.integers(0, 8))
    breaks = np.sort(rng.uniform(region.z_lo - 0.2, region.z_hi + 0.2, k))
    values = np.sort(rng.exponential(rng.uniform(0.1, 5.0), k + 1))[::-1]
    if rng.random() < 0.2:
        values[-1] = 0.0
    return StepFunction(tuple(breaks), tuple(values))


def random_xi(rng, lo, hi):
    k = int(rng.integers(0, 8))
    breaks = np.sort(rng.uniform(lo - 0.1 * (hi - lo), hi + 0.1 * (hi - lo), k))
    return StepFunction(tuple(breaks), tuple(rng.normal(0.0, rng.uniform(0.1, 10.0), k + 1)))


def test_integral_relations(criterion):
    with criterion(2, "integral relations for non-increasing eta and arbitrary xi"):
        start = time.perf_counter()
        rng = np.random.default_rng(SEED + 2)
        specs = [DesignSpec(delta_min=0.05),
                 DesignSpec(estimate_rule="fixed", delta_a=-0.3, delta_min=0.2)]
        specs += [spec_with_interval(rng) for _ in range(3)]
        for spec in specs:
            region = continuation_region(spec)
            curve = monotonise(spec, region)
            assert curve.plateaus
            zg = np.linspace(region.z_lo, region.z_hi, 1001)
            lo, hi = float(curve(zg).min()), float(curve(zg).max())
            for _ in range(1000):
                d10, _ = verify_lemma1(spec, region, random_eta(rng, region), np.zeros_like, curve)
                assert d10 >= -1e-9
            for _ in range(1000):
                _, d11 = verify_lemma1(spec, region, StepFunction((), (1.0,)), random_xi(rng, lo, hi), curve)
                assert d11 <= 1e-8
        within_budget(start)


# 3
def test_whole_region_constant(criterion):
    with criterion(3, "negative effect, fixed estimate: one full-region constant"):
        start = time.perf_counter()

        def closed_form(spec):
            t = math.sqrt(spec.n1 / 2.0) * spec.delta_a
            z0 = float(-mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(spec.alpha0) - 1))
            z1 = float(-mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(spec.alpha1) - 1))
            num = mpmath.ncdf(t - z0) - mpmath.ncdf(t - z1)
            return float(num / (mpmath.mpf(spec.alpha0) - mpmath.mpf(spec.alpha1)))

        ref = DesignSpec(estimate_rule="fixed", delta_a=-0.3, delta_min=1.0)
        assert abs(closed_form(ref) - 0.136208) <= 1e-6
        rng = np.random.default_rng(SEED + 3)
        specs = [ref] + [random_spec(rng, rule="fixed", delta_a=-rng.uniform(0.01, 0.8)) for _ in range(20)]
        for spec in specs:
            region = continuation_region(spec)
            curve = monotonise(spec, region)
            assert len(curve.plateaus) == 1
            p = curve.plateaus[0]
            assert p.a == region.z_lo and p.b == region.z_hi
            # Q = l / delta_min under the fixed rule
            assert abs(p.level * spec.delta_min - closed_form(spec)) <= 1e-8
        within_budget(start)


# 4
def test_calibration(designs, criterion):
    with criterion(4, "calibration: level alpha - alpha1, exact size alpha at delta = 0"):
        start = time.perf_counter()
        for spec, region, _, ce, _ in designs:
            achieved = quad_mass(lambda t: float(ce(t)), region.z_lo, region.z_hi, ce.breakpoints())
            assert abs(achieved - (spec.alpha - spec.alpha1)) <= 1e-8
            assert abs(exact_rejection(ce, spec, 0.0) - spec.alpha) <= 1e-8
        within_budget(start)


# 5
@dataclass(frozen=True)
class ScaledCE:
    """``scale * curve`` as a conditional error function."""

    curve: PiecewiseLinearCurve
    scale: float

    def __call__(self, z):
        return self.scale * self.curve(z)

    def breakpoints(self):
        return self.curve.breakpoints()


@dataclass(frozen=True)
class PerturbedCurve:
    """``base * exp(eps * g)`` with non-decreasing ``g``."""

    base: object
    g: PiecewiseLinearCurve
    eps: float

    def __call__(self, z):
        return self.base(z) * np.exp(self.eps * np.log(self.g(z)))

    def breakpoints(self):
        return sorted(set(self.base.breakpoints()) | set(self.g.breakpoints()))


def competitors(rng, spec, region, curve):
    target = spec.alpha - spec.alpha1
    out = [flat_ce(spec)]
    for _ in range(25):
        out.append(calibrated_ce(random_monotone_curve(rng, region), spec))
    while len(out) < 41:
        h = random_monotone_curve(rng, region)
        scale = target / quad_mass(lambda t: float(h(t)), region.z_lo, region.z_hi, h.knots)
        if scale * max(h.values) < 0.99:
            out.append(ScaledCE(h, scale))
    for eps in np.geomspace(1e-3, 1.0, 14):
        g = random_monotone_curve(rng, region)
        out.append(calibrated_ce(PerturbedCurve(curve, g, eps), spec))
    return out


def test_optimality_against_competitors(criterion):
    with criterion(5, "optimality among level-calibrated non-decreasing CE functions"):
        start = time.perf_counter()
        rng = np.random.default_rng(SEED + 5)
        specs = [DesignSpec(delta_min=0.05), DesignSpec(),
                 DesignSpec(estimate_rule="fixed", delta_a=-0.2, delta_min=0.2)]
        specs += [spec_with_interval(rng) for _ in range(4)] + [random_spec(rng)]
        for spec in specs:
            region = continuation_region(spec)
            curve = monotonise(spec, region)
            best = optimal_ce(spec, curve=curve)
            best_obj = objective(best, spec)
            z = np.linspace(region.z_lo, region.z_hi, 2001)
            rivals = competitors(rng, spec, region, curve)
            assert len(rivals) >= 50
            for ce in rivals:
                v = np.asarray(ce(z))
                assert np.min(np.diff(v)) >= -1e-12
                gap = objective(ce, spec) - best_obj
                if np.max(np.abs(v - best(z))) > 1e-4:
                    assert gap > 1e-8
                else:
                    assert gap >= -1e-8
        within_budget(start)


# 6
def test_constrained_vs_unconstrained(designs, criterion):
    with criterion(6, "unconstrained objective <= monotone objective, equal without decrease"):
        start = time.perf_counter()
        seen_equal = 0
        for spec, region, curve, ce, raw in designs:
            mono, free = objective(ce, spec), objective(raw, spec)
            assert free <= mono + 1e-9
            if not find_decreasing_intervals(spec, region):
                assert abs(free - mono) <= 1e-9
                seen_equal += 1
        assert seen_equal > 0
        within_budget(start)


# 7
def test_type1_bound_chain(criterion):
    with criterion(7, "type I bound chain exact <= b1 <= b2 <= b3 = alpha"):
        start = time.perf_counter()
        rng = np.random.default_rng(SEED + 7)
        for _ in range(200):
            spec = random_spec(rng)
            delta = -float(np.exp(rng.uniform(np.log(1e-3), np.log(1.5))))
            ce = optimal_ce(spec)
            b1, b2, b3 = bound_chain(ce, spec, delta)
            exact = exact_rejection(ce, spec, delta)
            assert exact <= b1 + 1e-9
            assert b1 <= b2 + 1e-9
            assert b2 <= b3 + 1e-9
            a, a0, a1 = (Fraction(x) for x in (spec.alpha, spec.alpha0, spec.alpha1))
            assert a1 * (a0 - a) / (a0 - a1) + a0 * (a - a1) / (a0 - a1) == a
            assert abs(b3 - spec.alpha) <= 4 * math.ulp(spec.alpha)
        within_budget(start)


# 8
def test_pava_agreement(criterion):
    with criterion(8, "agreement with the weighted isotonic projection at step 1e-3"):
        start = time.perf_counter()
        rng = np.random.default_rng(SEED + 8)
        specs = [DesignSpec(delta_min=0.05)] + [spec_with_interval(rng) for _ in range(10)]
        for spec in specs:
            region = continuation_region(spec)
            curve = monotonise(spec, region)
            z, fit = pava_reference(spec, region, 1e-3)
            dq = np.max(np.abs(q_function(z, spec) * q_log_derivative(z, spec)))
            assert np.max(np.abs(curve(z) - fit)) <= 5e-3 * dq
        within_budget(start)


# 9
def test_psi_machinery(criterion):
    with criterion(9, "psi round trip, psi(0) = 1 - beta_c, conditional power identity"):
        start = time.perf_counter()
        rng = np.random.default_rng(SEED + 9)
        y = np.concatenate([-np.geomspace(1e-12, 1e6, 2000), -rng.uniform(0, 1e6, 1000), [0.0]])
        for beta_c in (1 - std_normal_cdf(2.0), 0.05, 0.2, 0.5, 0.8, std_normal_cdf(2.0)):
            ctx = PsiContext(beta_c)
            u = psi(y, ctx)
            inner = u < ctx.u_max
            err = np.abs(nu2_prime(u[inner], ctx) - y[inner])
            assert np.all(err <= 1e-9 * np.maximum(1.0, np.abs(y[inner])))
            # slopes too small to move u off 1 - beta_c in double precision
            assert np.all(np.abs(y[~inner]) <= 1e-9)
            assert abs(psi(0.0, ctx) - (1.0 - beta_c)) <= 1e-15
        for _ in range(100):
            spec = random_spec(rng)
            ce = optimal_ce(spec)
            z = rng.uniform(ce.region.z_lo, ce.region.z_hi, 20)
            cp = conditional_power(ce(z), second_stage_n(ce, z, spec), interim_estimate(z, spec))
            assert np.max(np.abs(cp - (1.0 - spec.beta_c))) <= 1e-9
        within_budget(start)


# 10
def test_interval_count(criterion):
    with criterion(10, "at most two decreasing intervals (observational)"):
        start = time.perf_counter()
        rng = np.random.default_rng(SEED + 10)
        counts, findings = [], []
        for _ in range(100):
            spec = random_spec(rng, rule="truncated-observed")
            n = len(find_decreasing_intervals(spec, continuation_region(spec)))
            counts.append(n)
            if n > 2:
                findings.append(spec.to_dict())
        if findings:
            warnings.warn(f"{len(findings)} specs with more than two decreasing intervals: {findings}")
        assert max(counts) <= 2 or findings
        within_budget(start)


# 11
CONFIG = """alpha = 0.025
alpha0 = 0.5
alpha1 = 0.01
beta_c = 0.2
n1 = 50
delta_a = 0.3
delta_min = 0.05
"""


def test_cli_determinism_and_exit_codes(tmp_path, capsys, monkeypatch, criterion):
    with criterion(11, "CLI determinism, report schema and exit codes"):
        start = time.perf_counter()
        cfg = tmp_path / "design.toml"
        cfg.write_text(CONFIG)

        reports = []
        for i in range(2):
            out = tmp_path / f"r{i}.json"
            assert main(["design", str(cfg), "--out", str(out), "--deltas=-0.5,-0.1,0"]) == 0
            d = json.loads(out.read_text())
            assert tuple(d) == REPORT_FIELDS
            d.pop("timestamp")
            reports.append(json.dumps(d, indent=2).encode())
        assert reports[0] == reports[1]

        tables = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for p in tables:
            assert main(["curves", str(cfg), "--grid-step", "0.01", "--out", str(p)]) == 0
        assert tables[0].read_bytes() == tables[1].read_bytes()

        capsys.readouterr()
        for cmd in (["type1", str(cfg), "--deltas=-1,-0.2,0"], ["compare", str(cfg)]):
            outs = []
            for _ in range(2):
                assert main(cmd) == 0
                outs.append(capsys.readouterr().out)
            assert outs[0] == outs[1]

        monkeypatch.setenv(REPORT_DIR_ENV, str(tmp_path))
        assert main(["design", str(cfg)]) == 0
        assert (tmp_path / "design.report.json").exists()
        monkeypatch.delenv(REPORT_DIR_ENV)

        bad = tmp_path / "bad.toml"
        for text in (CONFIG.replace("beta_c = 0.2", "beta_c = 0.99"), CONFIG + "extra = 1\n", "alpha = = 1\n"):
            bad.write_text(text)
            assert main(["design", str(bad)]) == 2
        assert main(["type1", str(cfg), "--deltas=0.5"]) == 2
        bad.write_text(CONFIG + "[tolerances]\nmax_iter = 1\n")
        assert main(["design", str(bad)]) == 3
        assert main(["design", str(tmp_path / "missing.toml")]) == 4
        assert main(["design", str(cfg), "--out", str(tmp_path / "nodir" / "r.json")]) == 4
        within_budget(start)
