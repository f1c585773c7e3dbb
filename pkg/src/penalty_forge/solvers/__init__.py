from .base import (
    TRACE_COLUMNS,
    IterateTrace,
    LineSearchError,
    SolveReport,
    SolverConfig,
    StepSolveError,
    TraceRecord,
    resolve_preconditioner,
)
from .diagnostics import (
    SweepPoint,
    consistency_sweep,
    energy_defect,
    lemma2_residual,
    penalty_multiplier,
    scalar_fixed_point_map,
    scalar_newton_map,
)
from .fixed_point import (
    LineSearchControl,
    armijo_line_search,
    backtracking,
    fixed_point_step,
    newton_matrix,
    newton_weight_matrix,
    semismooth_newton_step,
    solve_algorithm1,
    solve_algorithm2,
    solve_newton,
)
from .pdas import PdasState, kkt_residual, solve_pdas
