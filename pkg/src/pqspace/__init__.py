"""Finite quasi-metric spaces with probability measures.

Submodules: ``core`` (spaces, validation, set distances), ``concentration``
(exact and sampled concentration functions and the inequalities built on
them), ``seqsim`` (local alignment scores turned into quasi-metrics),
``cube`` (Hamming-cube laws and bounds), ``product`` (product-space tails)
and ``cli``.
"""

from .core import (
    SIDES,
    FinitePQSpace,
    InvalidSpaceError,
    NoWeightExists,
    Tolerances,
    ValidationReport,
    Violation,
    WeightFunction,
    associated_metric,
    conjugate,
    measure,
    neighborhood,
    recover_weight,
    set_distance,
    set_distances,
    space_from_matrix,
    validate,
)
from .serialization import dumps_space, load_space, loads_space, save_space

__version__ = "0.1.0"

__all__ = [
    "SIDES",
    "FinitePQSpace",
    "InvalidSpaceError",
    "NoWeightExists",
    "Tolerances",
    "ValidationReport",
    "Violation",
    "WeightFunction",
    "associated_metric",
    "conjugate",
    "measure",
    "neighborhood",
    "recover_weight",
    "set_distance",
    "set_distances",
    "space_from_matrix",
    "validate",
    "dumps_space",
    "load_space",
    "loads_space",
    "save_space",
]
