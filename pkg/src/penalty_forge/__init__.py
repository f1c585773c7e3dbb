"""Exact penalty solvers for inequality-constrained optimization.

The core object is :class:`PenaltyProblem`; :func:`solve_algorithm1` runs the
implicit reweighted fixed-point iteration on its smoothed penalty functional.
"""
from .penalty import (
    ConstraintSystem,
    DiagonalWeights,
    GeneralObjective,
    PenaltyProblem,
    QuadraticObjective,
    chi_f_weights,
    j_eps_gradient,
    j_eps_value,
    j_value,
    phi_eps,
    phi_eps_prime,
    psi_eps,
    psi_exact,
)
from .solvers import (
    LineSearchControl,
    SolveReport,
    SolverConfig,
    consistency_sweep,
    solve_algorithm1,
    solve_algorithm2,
    solve_newton,
    solve_pdas,
)

__version__ = "0.1.0"
