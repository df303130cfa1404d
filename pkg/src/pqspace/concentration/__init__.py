"""Concentration functions, deviation inequalities and asymmetry."""

from .alpha import (
    MAX_EXACT_POINTS,
    AlphaValue,
    ConcentrationCurve,
    SandwichReport,
    SubsetTables,
    TooLargeError,
    alpha_curve,
    alpha_exact,
    alpha_monte_carlo_curve,
    auto_grid,
    check_sandwich,
)
from .asymmetry import (
    AsymmetryDistribution,
    asymmetry_distribution,
    asymmetry_distribution_sampled,
    check_asymmetry_bound,
)
from .deviation import (
    DeviationReport,
    LipschitzCheck,
    LipschitzFunction,
    NotLipschitzError,
    alpha_via_lipschitz,
    alpha_via_lipschitz_curve,
    check_abs_deviation,
    check_median_deviation,
    check_pair_deviation,
    deviation_sweep,
    median,
    set_distance_witnesses,
    verify_lipschitz,
    witness_family,
)
from .levy import LevyReport, levy_diagnostics

__all__ = [name for name in dir() if not name.startswith("_")]
