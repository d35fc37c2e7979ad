"""Dirichlet-eigenvalue shape optimisation with an inclusion constraint on pixel grids."""

from .errors import ConfigError, ConvergenceError, DomainTooSmallError, EmptyMaskError, GridMismatchError
from .grid import (
    ConstraintPair,
    DomainMask,
    GridSpec,
    ScalarField,
    closed_neighborhood,
    connected_components,
    convexity_defect,
    excess_distance,
    measure,
    perimeter,
    steiner_symmetrize,
    within_dilation,
)
from .metrics import GammaDistanceReport, coarea_check, energy, gamma_distance
from .optimize import (
    ConstrainedProblem,
    ObjectiveSpec,
    OptimizationTrace,
    PenalizedProblem,
    detect_case,
    optimize_constrained,
    optimize_penalized,
)
from .solver import EigenResult, SolverConfig, apply_laplacian, eigensolve, solve_torsion

__version__ = "0.1.0"
