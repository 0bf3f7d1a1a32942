import contextlib
import math

import numpy as np
import pytest

from monotone_ce.design import DesignSpec, continuation_region

DEFAULT = dict(alpha=0.025, alpha0=0.5, alpha1=0.01, beta_c=0.2, n1=50.0,
               delta_a=0.3, delta_min=0.15, estimate_rule="truncated-observed")


def random_spec(rng, rule=None, delta_a=None):
    """Random valid spec; feasibility of the level target holds by construction."""
    alpha = rng.uniform(0.01, 0.05)
    return DesignSpec(
        alpha=alpha,
        alpha1=alpha * rng.uniform(0.1, 0.7),
        alpha0=rng.uniform(0.2, 0.7),
        beta_c=rng.uniform(0.05, 0.5),
        n1=rng.uniform(10, 150),
        delta_a=rng.uniform(-0.4, 0.8) if delta_a is None else delta_a,
        delta_min=rng.uniform(0.02, 0.3),
        estimate_rule=rule or rng.choice(["fixed", "truncated-observed"]),
    )


def spec_with_interval(rng):
    """Truncated-observed spec whose Q has a decreasing stretch inside the region."""
    while True:
        spec = random_spec(rng, rule="truncated-observed", delta_a=rng.uniform(0.05, 0.6))
        region = continuation_region(spec)
        d_l = max(spec.kink, region.z_lo)
        d_u = min(1.0 / spec.theta, region.z_hi)
        if d_u - d_l > 0.05:
            return spec


@pytest.fixture
def default_spec():
    return DesignSpec(**DEFAULT)


@pytest.fixture
def interval_spec():
    # kink at 0.25, Q decreases until 1/theta = 2/3
    return DesignSpec(**{**DEFAULT, "delta_min": 0.05})


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Context manager recording a PASS/FAIL line for one acceptance criterion."""
    rows = request.config.stash.setdefault(ACCEPTANCE, [])

    @contextlib.contextmanager
    def record(number, title):
        ok = False
        try:
            yield
            ok = True
        finally:
            rows.append((number, title, ok))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config.stash.get(ACCEPTANCE, [])
    if not rows:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, title, ok in sorted(rows):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}")
