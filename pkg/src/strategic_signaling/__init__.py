"""Optimal strategic grade signaling to a Bayesian university, with and without a test score."""

from .model import (
    AssumptionError,
    AssumptionReport,
    DegenerateRegimeError,
    ModelParams,
    ParameterError,
    RegimeClassification,
    UsageError,
    classify_regime,
    posterior_utility,
    regime_boundaries,
    validate,
)
from .schemes import (
    GeneralScheme,
    SignalingScheme,
    Variant,
    collapse_scheme,
    optimal_scheme,
    optimal_scheme_no_test,
    optimal_scheme_relaxed,
    optimal_scheme_with_test,
    revealing_scheme,
)
from .metrics import OutcomeMetrics, closed_form_no_test, closed_form_with_test, evaluate
from .analysis import (
    BoundCheck,
    SweepResult,
    check_fpr_fnr_comparison,
    check_monotonicity,
    check_test_ratio_lemmas,
    check_utility_comparison,
    figure_data,
)
from .oracle import SimConfig, SimEstimate, brute_force_optimal, simulate

__version__ = "0.1.0"
