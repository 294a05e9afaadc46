"""Entrywise-accurate solver for SDDM linear systems.

The library couples a threshold-decay outer loop with randomized
low-diameter covers and boundary-expanded partial solves, and ships an
exact rational-arithmetic oracle used as ground truth by the test suite.
"""

from .core import (
    ApproxVector,
    IndexSet,
    ProbDistance,
    SddmMatrix,
    probability_distance,
    submatrix,
    validate_sddm,
)
from .cover import Cover, CoverParams, boundary_expand, build_cover, default_params
from .normwise import NormwiseConfig, normwise_solve, normwise_solve_scaled
from .solve import SolveReport, sddm_solve, solve_with_cover

__all__ = [
    "ApproxVector",
    "Cover",
    "CoverParams",
    "IndexSet",
    "NormwiseConfig",
    "ProbDistance",
    "SddmMatrix",
    "SolveReport",
    "boundary_expand",
    "build_cover",
    "default_params",
    "normwise_solve",
    "normwise_solve_scaled",
    "probability_distance",
    "sddm_solve",
    "solve_with_cover",
    "submatrix",
    "validate_sddm",
]
