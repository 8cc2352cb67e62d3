"""Finite element solvers for stationary Fokker-Planck-Kolmogorov equations under Cordes-type conditions."""
from .coefficients import (
    CoefficientField,
    CordesConditionError,
    CordesReport,
    check_cordes,
    check_cordes_lower_order,
    eval_gamma,
)
from .fpk_solver import (
    FpkSolution,
    convergence_study,
    effective_matrix,
    potential_from_source,
    solve_dirichlet,
    solve_periodic_fpk,
)
from .sparse_linalg import SolveConfig, solve_linear

__all__ = [
    "CoefficientField",
    "CordesConditionError",
    "CordesReport",
    "FpkSolution",
    "SolveConfig",
    "check_cordes",
    "check_cordes_lower_order",
    "convergence_study",
    "effective_matrix",
    "eval_gamma",
    "potential_from_source",
    "solve_dirichlet",
    "solve_linear",
    "solve_periodic_fpk",
]
