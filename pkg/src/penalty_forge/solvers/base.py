"""Configuration, iterate traces and reports shared by all solvers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ..linalg import spd_solve

TRACE_COLUMNS = ("k", "J_eps", "grad_inf", "active_size", "step_norm", "alpha_k", "lemma2_residual")

TERMINATION_REASONS = ("tolerance", "max_iter", "solver_failure", "nonmonotone_guard")


class StepSolveError(RuntimeError):
    """Inner linear solve of a step system failed."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class LineSearchError(RuntimeError):
    """Backtracking budget exhausted; ``last_alpha`` is the last trial."""

    def __init__(self, message, last_alpha, last_value):
        super().__init__(message)
        self.last_alpha = last_alpha
        self.last_value = last_value


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the fixed-point family of solvers.

    ``preconditioner`` is ``"problem"`` (use what the problem recommends,
    falling back to ``A`` for positive definite quadratics and to the
    identity otherwise), ``"identity"``, or an explicit SPD matrix.

    ``implicit_quadratic`` switches quadratic objectives to the variant that
    keeps ``A`` inside the step matrix, ``(alpha P + A + beta G^T chi G)``.

    ``monotone_guard`` is ``"warn"`` (log and continue) or ``"stop"``
    (terminate with reason ``nonmonotone_guard``).
    """

    alpha: float = 1.0
    epsilon: float = 1e-6
    preconditioner: object = "problem"
    tol: float = 1e-10
    max_iter: int = 100
    implicit_quadratic: bool = False
    monotone_guard: str = "warn"
    monotone_slack: float = 1e-12
    solve_tol: float = 1e-12
    lemma2: bool = True

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if self.monotone_guard not in ("warn", "stop"):
            raise ValueError("monotone_guard must be 'warn' or 'stop'")
        if isinstance(self.preconditioner, str) and self.preconditioner not in ("problem", "identity"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")

    def with_(self, **changes) -> "SolverConfig":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass
class TraceRecord:
    k: int
    J_eps: float
    grad_inf: float
    active_size: int
    step_norm: float = float("nan")
    alpha_k: float = float("nan")
    lemma2_residual: float = float("nan")
    slope: float = float("nan")

    def row(self):
        return tuple(getattr(self, c) for c in TRACE_COLUMNS)


class IterateTrace:
    """Append-only list of :class:`TraceRecord` with strictly increasing ``k``."""

    def __init__(self):
        self._records: list[TraceRecord] = []

    def append(self, record: TraceRecord):
        if self._records and record.k <= self._records[-1].k:
            raise ValueError("trace indices must be strictly increasing")
        self._records.append(record)

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def __getitem__(self, i):
        return self._records[i]

    def column(self, name):
        return np.array([getattr(r, name) for r in self._records], dtype=float)


@dataclass
class SolveReport:
    x: np.ndarray
    converged: bool
    iterations: int
    grad_inf: float
    trace: IterateTrace
    reason: str
    message: str = ""
    multiplier: Optional[np.ndarray] = None
    iterates: list = field(default_factory=list, repr=False)
    nonmonotone_steps: list = field(default_factory=list)
    inactive_growth_steps: list = field(default_factory=list)

    def summary(self):
        return {
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "grad_inf": float(self.grad_inf),
            "reason": self.reason,
            "message": self.message,
            "nonmonotone_steps": list(self.nonmonotone_steps),
            "inactive_growth_steps": list(self.inactive_growth_steps),
        }


# ---------------------------------------------------------------------------
# preconditioner resolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResolvedPreconditioner:
    matrix: object = None
    step_solver: object = None
    source: str = ""


def _identity_like(problem):
    n = problem.n
    if sp.issparse(problem.constraints.G):
        return sp.identity(n, format="csr")
    return np.eye(n)


def _positive_definite(A):
    probe = np.ones(A.shape[0])
    _, rep = spd_solve(A, probe)
    return rep.success


def resolve_preconditioner(problem, config: SolverConfig) -> ResolvedPreconditioner:
    choice = config.preconditioner
    if not isinstance(choice, str):
        return ResolvedPreconditioner(matrix=choice, source="supplied")
    if choice == "identity":
        return ResolvedPreconditioner(matrix=_identity_like(problem), source="identity")
    if problem.step_solver is not None:
        return ResolvedPreconditioner(step_solver=problem.step_solver, source="problem-solver")
    if problem.preconditioner is not None:
        return ResolvedPreconditioner(matrix=problem.preconditioner, source="problem")
    if problem.is_quadratic and _positive_definite(problem.objective.A):
        return ResolvedPreconditioner(matrix=problem.objective.A, source="objective")
    return ResolvedPreconditioner(matrix=_identity_like(problem), source="identity")
