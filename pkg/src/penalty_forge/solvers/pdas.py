"""Primal-dual active set method for ``min F(x)  s.t.  Gx <= g``."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..linalg import SingularSystemError, saddle_solve
from .base import IterateTrace, SolveReport, TraceRecord

logger = logging.getLogger(__name__)

__all__ = ["PdasState", "kkt_residual", "solve_pdas"]


@dataclass
class PdasState:
    x: np.ndarray
    mu: np.ndarray
    gamma: float
    active: np.ndarray

    @property
    def inactive(self):
        return ~self.active


def kkt_residual(x, mu, problem, gamma=1.0):
    """Sup norm of stationarity and of the complementarity fixed-point equation."""
    cons = problem.constraints
    stat = problem.objective.gradient(x) + cons.G.T @ mu
    comp = mu - np.maximum(0.0, mu + gamma * cons.residual(x))
    return max(float(np.max(np.abs(stat), initial=0.0)), float(np.max(np.abs(comp), initial=0.0)))


def _gather_rows(G, mask):
    idx = np.flatnonzero(mask)
    return G[idx]


def solve_pdas(x0, mu0, problem, gamma=1.0, reg=0.0, max_iter=100, tol=1e-10,
               keep_iterates=False) -> SolveReport:
    """Primal-dual active set iteration.

    The active set is ``{j : (mu + gamma (Gx - g))_j > 0}``; each step solves
    the equality-constrained KKT system on it (a Newton step on ``F`` for
    non-quadratic objectives).  Terminates when two consecutive active sets
    coincide (and, for non-quadratic ``F``, the step is below ``tol``).

    The returned report carries the multiplier in ``report.multiplier``.
    Singular KKT systems end the run with reason ``solver_failure`` and a
    message naming the deficient block.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    cons = problem.constraints
    x = np.array(x0, dtype=float, copy=True)
    mu = np.zeros(problem.m) if mu0 is None else np.array(mu0, dtype=float, copy=True)
    if mu.shape != (problem.m,):
        raise ValueError(f"mu0 has shape {mu.shape}, expected ({problem.m},)")
    quadratic = problem.is_quadratic
    trace = IterateTrace()
    report = SolveReport(x=x, converged=False, iterations=0, grad_inf=np.inf, trace=trace,
                         reason="max_iter", multiplier=mu)
    if keep_iterates:
        report.iterates.append(x.copy())
    prev = None
    step_norm = np.inf
    for k in range(max_iter + 1):
        state = PdasState(x, mu, gamma, (mu + gamma * cons.residual(x)) > 0)
        res = kkt_residual(x, mu, problem, gamma)
        rec = TraceRecord(k, problem.objective.value(x), res, int(state.active.sum()))
        report.x, report.multiplier, report.iterations, report.grad_inf = x, mu, k, res
        repeated = prev is not None and np.array_equal(state.active, prev)
        if repeated and (quadratic or step_norm <= tol * max(1.0, np.linalg.norm(x))):
            trace.append(rec)
            report.converged, report.reason = True, "tolerance"
            break
        if k == max_iter:
            trace.append(rec)
            report.message = "active sets did not settle (cycling or slow convergence)"
            break
        Ga = _gather_rows(cons.G, state.active)
        ga = cons.g[state.active]
        try:
            if quadratic:
                x_new, mu_a = saddle_solve(problem.objective.A, Ga, problem.objective.b, ga, reg)
            else:
                H = problem.objective.hessian(x)
                rhs = H @ x - problem.objective.gradient(x)
                x_new, mu_a = saddle_solve(H, Ga, rhs, ga, reg)
        except SingularSystemError as exc:
            trace.append(rec)
            report.reason, report.message = "solver_failure", str(exc)
            logger.warning("PDAS step %d: %s", k, exc)
            break
        mu_new = np.zeros(problem.m)
        mu_new[state.active] = mu_a
        step_norm = float(np.linalg.norm(x_new - x))
        rec.step_norm = step_norm
        trace.append(rec)
        prev = state.active
        x, mu = x_new, mu_new
        if keep_iterates:
            report.iterates.append(x.copy())
    return report
