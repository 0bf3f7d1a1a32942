"""Optimal non-decreasing conditional error functions for adaptive two-stage designs."""

__version__ = "0.1.0"

from .ce import (
    CalibrationResult,
    CEFunction,
    calibrate,
    ce_value,
    expected_sample_size,
    flat_ce,
    level,
    objective,
    optimal_ce,
    second_stage_n,
    unconstrained_ce,
)
from .design import (
    ContinuationRegion,
    DesignSpec,
    EstimateRule,
    continuation_region,
    interim_estimate,
    likelihood_ratio,
    q_derivative_sign,
    q_function,
)
from .errors import (
    BracketError,
    ConfigError,
    ConvergenceError,
    InfeasibleLevelError,
    MonotoneCEError,
    NumericalError,
    SpecError,
)
from .monotonise import (
    DecreasingInterval,
    MonotoneQ,
    Plateau,
    find_decreasing_intervals,
    flatten_step,
    monotonise,
    monotonise_curve,
    pava_reference,
    verify_lemma1,
)
from .numerics import Tolerance
from .nupsi import PsiContext, nu2, nu2_prime, psi
from .type1 import Type1Row, bound_chain, exact_rejection, keyiq_check, pooled_q1, type1_scan
