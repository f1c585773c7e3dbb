"""Implicit fixed-point iteration, its line-search variant and semismooth Newton.

One step of the fixed-point iteration freezes the reweighting diagonal at the
current iterate and solves

    (alpha P + beta G^T chi_eps(x_k) G) d_k = -J_eps'(x_k),

which is a descent direction for ``J_eps`` whenever ``P`` is positive
definite.  Semismooth Newton replaces ``alpha P`` by ``F''`` and ``chi`` by
the generalized derivative of ``phi_eps'`` (``1/eps`` on the open band
``(0, eps)``).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from ..linalg import assemble_step_matrix, spd_solve
from ..penalty import (
    DiagonalWeights,
    chi_f_weights,
    j_eps_gradient,
    j_eps_value,
    phi_eps_prime,
    psi_eps,
    scaled_tol,
    weights_from_residual,
)
from .base import (
    IterateTrace,
    LineSearchError,
    SolveReport,
    SolverConfig,
    StepSolveError,
    TraceRecord,
    resolve_preconditioner,
)

logger = logging.getLogger(__name__)

__all__ = [
    "LineSearchControl",
    "fixed_point_step",
    "solve_algorithm1",
    "armijo_line_search",
    "backtracking",
    "solve_algorithm2",
    "newton_weight_matrix",
    "semismooth_newton_step",
    "solve_newton",
]


@dataclass(frozen=True)
class LineSearchControl:
    c1: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 50

    def __post_init__(self):
        if not 0 < self.c1 < 1:
            raise ValueError("c1 must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.max_backtracks < 0:
            raise ValueError("max_backtracks must be nonnegative")


def _solve_checked(M, rhs, tol, what):
    d, rep = spd_solve(M, rhs, tol)
    if not rep.success:
        raise StepSolveError(f"{what} solve failed ({rep.method}): {rep.message}", rep)
    return d


def _direction(x, problem, config, precond, grad, weights):
    rhs = -grad
    if precond.step_solver is not None:
        d = np.asarray(precond.step_solver(x, weights, config.alpha, problem.beta, rhs), dtype=float)
        if not np.all(np.isfinite(d)):
            raise StepSolveError("problem-supplied step solver returned non-finite values")
        return d
    A = problem.objective.A if (config.implicit_quadratic and problem.is_quadratic) else None
    M = assemble_step_matrix(config.alpha, precond.matrix, problem.beta,
                             problem.constraints.G, weights, A)
    return _solve_checked(M, rhs, config.solve_tol, "step system")


def fixed_point_step(x_k, problem, config: SolverConfig, *, _precond=None):
    """One implicit fixed-point direction.

    Returns
    -------
    d : ndarray
        Step ``x_{k+1} - x_k``.
    diagnostics : dict
        ``gradient``, ``weights`` (the frozen ``chi``), ``slope``
        (``<d, J_eps'(x_k)>``) and ``preconditioner`` (its source).
    """
    x_k = np.asarray(x_k, dtype=float)
    precond = _precond or resolve_preconditioner(problem, config)
    eps = config.epsilon
    grad = j_eps_gradient(x_k, problem, eps)
    weights, _ = chi_f_weights(x_k, problem, eps)
    if not np.any(grad):
        d = np.zeros_like(x_k)
    else:
        d = _direction(x_k, problem, config, precond, grad, weights)
    return d, {"gradient": grad, "weights": weights, "slope": float(d @ grad),
               "preconditioner": precond.source}


@dataclass
class _Point:
    x: np.ndarray
    r: np.ndarray
    F: float
    J: float
    grad: np.ndarray
    weights: DiagonalWeights


def _evaluate(x, problem, eps):
    # everything the loop needs at x from a single residual evaluation;
    # same arithmetic as j_eps_value / j_eps_gradient / chi_f_weights
    cons, obj = problem.constraints, problem.objective
    r = cons.residual(x)
    F = obj.value(x)
    J = F + problem.beta * psi_eps(r, eps)
    grad = obj.gradient(x) + problem.beta * (cons.G.T @ phi_eps_prime(r, eps))
    weights, _ = weights_from_residual(r, cons.g, eps)
    return _Point(x, r, F, J, grad, weights)


def _lemma2_available(problem, config, precond):
    return config.lemma2 and problem.is_quadratic and precond.matrix is not None


def _run_descent(x0, problem, config, line_search=None, keep_iterates=False):
    from .diagnostics import energy_defect

    eps = config.epsilon
    x = np.array(x0, dtype=float, copy=True)
    if x.shape != (problem.n,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({problem.n},)")
    precond = resolve_preconditioner(problem, config)
    with_lemma2 = _lemma2_available(problem, config, precond)
    trace = IterateTrace()
    report = SolveReport(x=x, converged=False, iterations=0, grad_inf=np.inf,
                         trace=trace, reason="max_iter")
    if keep_iterates:
        report.iterates.append(x.copy())
    pt = _evaluate(x, problem, eps)
    J = pt.J
    k = 0
    while True:
        grad, weights = pt.grad, pt.weights
        gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
        rec = TraceRecord(k, J, gnorm, weights.active_count)
        report.x, report.iterations, report.grad_inf = x, k, gnorm
        if gnorm < config.tol:
            trace.append(rec)
            report.converged, report.reason = True, "tolerance"
            break
        if k >= config.max_iter:
            trace.append(rec)
            report.reason = "max_iter"
            break
        try:
            d = _direction(x, problem, config, precond, grad, weights)
        except (StepSolveError, np.linalg.LinAlgError) as exc:
            trace.append(rec)
            report.reason, report.message = "solver_failure", str(exc)
            logger.warning("step %d: %s", k, exc)
            break
        rec.slope = float(d @ grad)
        step = 1.0
        if line_search is not None:
            try:
                step = armijo_line_search(x, d, problem, eps, line_search, _value=J, _grad=grad)
            except LineSearchError as exc:
                trace.append(rec)
                report.reason, report.message = "solver_failure", str(exc)
                break
        x_new = x + step * d
        new = _evaluate(x_new, problem, eps)
        J_new = new.J
        rec.step_norm = float(np.linalg.norm(step * d))
        rec.alpha_k = step
        if with_lemma2 and line_search is None:
            rec.lemma2_residual = energy_defect(x_new - x, new.F - pt.F, pt.r, new.r, weights, problem, config,
                                                precond.matrix)
        trace.append(rec)

        grown = ~weights.active_mask & (new.r >= 0)
        if grown.any():
            report.inactive_growth_steps.append(k)
            logger.debug("step %d: %d inactive rows became active", k, int(grown.sum()))
        if J_new > J + scaled_tol(J, config.monotone_slack):
            report.nonmonotone_steps.append(k)
            logger.info("step %d: J_eps increased by %.3e", k, J_new - J)
            if config.monotone_guard == "stop":
                report.reason = "nonmonotone_guard"
                report.message = f"J_eps increased at step {k}"
                break
        x, J, pt = x_new, J_new, new
        k += 1
        if keep_iterates:
            report.iterates.append(x.copy())
    return report


def solve_algorithm1(x0, problem, config: SolverConfig, keep_iterates=False) -> SolveReport:
    """Implicit fixed-point iteration with unit steps.

    Stops once ``||J_eps'(x_k)||_inf < config.tol`` (reason ``tolerance``)
    or after ``config.max_iter`` steps.  Increases of ``J_eps`` are recorded
    in ``nonmonotone_steps``; steps where an inactive row turned active are
    recorded in ``inactive_growth_steps``.
    """
    return _run_descent(x0, problem, config, keep_iterates=keep_iterates)


def backtracking(fun, x, d, f0, slope, control: LineSearchControl):
    """Largest ``alpha`` in ``{1, shrink, shrink^2, ...}`` passing Armijo."""
    if not slope < 0:
        raise ValueError(f"d is not a descent direction (slope {slope:.3e} >= 0)")
    alpha = 1.0
    value = np.nan
    for _ in range(control.max_backtracks + 1):
        value = fun(x + alpha * d)
        if value <= f0 + control.c1 * alpha * slope:
            return alpha
        alpha *= control.shrink
    raise LineSearchError(
        f"Armijo condition not met after {control.max_backtracks} backtracks",
        last_alpha=alpha / control.shrink, last_value=value)


def armijo_line_search(x_k, d_k, problem, eps, control: LineSearchControl = LineSearchControl(),
                       *, _value=None, _grad=None):
    """Armijo backtracking on ``J_eps`` along ``d_k``."""
    x_k = np.asarray(x_k, dtype=float)
    d_k = np.asarray(d_k, dtype=float)
    f0 = j_eps_value(x_k, problem, eps) if _value is None else _value
    grad = j_eps_gradient(x_k, problem, eps) if _grad is None else _grad
    return backtracking(lambda z: j_eps_value(z, problem, eps), x_k, d_k, f0,
                        float(grad @ d_k), control)


def solve_algorithm2(x0, problem, config: SolverConfig,
                     line_search_control: LineSearchControl = LineSearchControl(),
                     keep_iterates=False) -> SolveReport:
    """Fixed-point direction with an Armijo steplength."""
    return _run_descent(x0, problem, config, line_search=line_search_control,
                        keep_iterates=keep_iterates)


def newton_weight_matrix(x_k, problem, eps) -> DiagonalWeights:
    """Generalized derivative of ``phi_eps'``: ``1/eps`` where ``0 < (Gx-g)_i < eps``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    r = problem.constraints.residual(np.asarray(x_k, dtype=float))
    band = (r > 0) & (r < eps)
    return DiagonalWeights(np.where(band, 1.0 / eps, 0.0), band)


def newton_matrix(x_k, problem, eps):
    N = newton_weight_matrix(x_k, problem, eps)
    H = problem.objective.hessian(x_k)
    G = problem.constraints.G
    if isinstance(H, spla.LinearOperator):
        GN = _gram_operator(G, N)
        return spla.LinearOperator(H.shape, matvec=lambda v: H @ v + problem.beta * (GN @ v),
                                   dtype=float)
    if N.active_count == 0:
        return H
    return assemble_step_matrix(1.0, H, problem.beta, G, N)


def _gram_operator(G, weights):
    mask = np.flatnonzero(weights.active_mask)
    Ga = G[mask]
    w = weights.entries[mask]
    return spla.LinearOperator((G.shape[1], G.shape[1]), matvec=lambda v: Ga.T @ (w * (Ga @ v)),
                               dtype=float)


def semismooth_newton_step(x_k, problem, eps, tol=1e-12):
    """Newton direction ``(F'' + beta G^T N_k G) d = -J_eps'(x_k)``.

    Carries no descent guarantee.  Raises :class:`StepSolveError` when the
    Newton matrix is singular or indefinite.
    """
    x_k = np.asarray(x_k, dtype=float)
    grad = j_eps_gradient(x_k, problem, eps)
    if not np.any(grad):
        return np.zeros_like(x_k)
    M = newton_matrix(x_k, problem, eps)
    return _solve_checked(M, -grad, tol, "Newton system")


def solve_newton(x0, problem, config: SolverConfig, keep_iterates=False,
                 line_search: LineSearchControl = None) -> SolveReport:
    """Semismooth Newton iteration on ``J_eps' = 0``.

    Full steps by default (fast locally, no global guarantee).  With a
    ``line_search`` control the step is damped by Armijo backtracking on
    ``J_eps``; for convex ``F`` the Newton direction is a descent direction
    wherever the Newton matrix is positive definite.
    """
    eps = config.epsilon
    x = np.array(x0, dtype=float, copy=True)
    trace = IterateTrace()
    report = SolveReport(x=x, converged=False, iterations=0, grad_inf=np.inf,
                         trace=trace, reason="max_iter")
    if keep_iterates:
        report.iterates.append(x.copy())
    J = j_eps_value(x, problem, eps)
    for k in range(config.max_iter + 1):
        grad = j_eps_gradient(x, problem, eps)
        gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
        weights, _ = chi_f_weights(x, problem, eps)
        rec = TraceRecord(k, J, gnorm, weights.active_count)
        report.x, report.iterations, report.grad_inf = x, k, gnorm
        if gnorm < config.tol:
            trace.append(rec)
            report.converged, report.reason = True, "tolerance"
            break
        if k == config.max_iter:
            trace.append(rec)
            break
        try:
            d = semismooth_newton_step(x, problem, eps, config.solve_tol)
        except (StepSolveError, np.linalg.LinAlgError, NotImplementedError) as exc:
            trace.append(rec)
            report.reason, report.message = "solver_failure", str(exc)
            break
        rec.slope = float(d @ grad)
        step = 1.0
        if line_search is not None:
            try:
                step = armijo_line_search(x, d, problem, eps, line_search, _value=J, _grad=grad)
            except (LineSearchError, ValueError) as exc:
                trace.append(rec)
                report.reason, report.message = "solver_failure", str(exc)
                break
        rec.step_norm = float(np.linalg.norm(step * d))
        rec.alpha_k = step
        trace.append(rec)
        x = x + step * d
        J_new = j_eps_value(x, problem, eps)
        if J_new > J + scaled_tol(J, config.monotone_slack):
            report.nonmonotone_steps.append(k)
        J = J_new
        if keep_iterates:
            report.iterates.append(x.copy())
    return report
