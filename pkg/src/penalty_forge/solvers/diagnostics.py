"""Theory-derived checks: energy identity, consistency in eps, scalar maps."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..penalty import chi_f_weights, j_value, phi_eps_prime
from .base import SolveReport, SolverConfig, resolve_preconditioner
from .fixed_point import solve_algorithm1

logger = logging.getLogger(__name__)

__all__ = [
    "lemma2_residual",
    "energy_defect",
    "SweepPoint",
    "consistency_sweep",
    "penalty_multiplier",
    "scalar_fixed_point_map",
    "scalar_newton_map",
]


def lemma2_residual(x_k, x_k1, problem, config: SolverConfig, P=None):
    """Absolute defect of the per-step energy identity.

    For a quadratic objective and a step ``d = x_k1 - x_k`` produced by the
    fixed-point iteration,

        R + F(x_k1) - F(x_k) + beta/2 (chi G d, G d)
          + beta/2 sum_{j active} chi_j ((Gx_k1 - g)_j^2 - (Gx_k - g)_j^2) = 0

    with ``R = alpha (P d, d) - 1/2 (A d, d)`` (``+ 1/2 (A d, d)`` for the
    implicit-quadratic variant).  Any other ``x_k1`` generically leaves a
    nonzero defect.
    """
    if not problem.is_quadratic:
        raise ValueError("energy identity is only available for quadratic objectives")
    if P is None:
        P = resolve_preconditioner(problem, config).matrix
        if P is None:
            raise ValueError("energy identity needs an explicit preconditioner matrix")
    x_k = np.asarray(x_k, dtype=float)
    x_k1 = np.asarray(x_k1, dtype=float)
    cons = problem.constraints
    weights, _ = chi_f_weights(x_k, problem, config.epsilon)
    dF = problem.objective.value(x_k1) - problem.objective.value(x_k)
    return energy_defect(x_k1 - x_k, dF, cons.residual(x_k), cons.residual(x_k1), weights, problem, config, P)


def energy_defect(d, dF, r0, r1, weights, problem, config: SolverConfig, P):
    """Core of :func:`lemma2_residual` from precomputed step quantities.

    ``dF = F(x_k1) - F(x_k)``, ``r0``/``r1`` are the residuals at both ends
    and ``weights`` the reweighting frozen at ``x_k``.
    """
    A = problem.objective.A
    Ad_d = float(d @ (A @ d))
    sign = 1.0 if config.implicit_quadratic else -1.0
    R = config.alpha * float(d @ (P @ d)) + sign * 0.5 * Ad_d
    Gd = problem.constraints.G @ d
    chi = weights.entries
    mask = weights.active_mask
    quad = 0.5 * problem.beta * float(chi @ (Gd * Gd))
    shift = 0.5 * problem.beta * float(np.sum(chi[mask] * (r1[mask] ** 2 - r0[mask] ** 2)))
    return abs(R + dF + quad + shift)


def penalty_multiplier(x, problem, eps):
    """Multiplier estimate ``beta * phi_eps'(Gx - g)`` recovered from a penalty solution."""
    return problem.beta * phi_eps_prime(problem.constraints.residual(np.asarray(x, dtype=float)), eps)


@dataclass
class SweepPoint:
    eps: float
    x: Optional[np.ndarray]
    J: float
    report: Optional[SolveReport]
    error: str = ""


def consistency_sweep(problem, eps_list, config: SolverConfig, x0=None):
    """Solve for each ``eps`` in a strictly decreasing list, warm starting.

    ``J`` is the exact (non-smooth) penalty functional at each solution.
    A failing ``eps`` is recorded and the sweep continues from the last good
    iterate.
    """
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list):
        raise ValueError("eps values must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps values must be strictly decreasing")
    x = np.zeros(problem.n) if x0 is None else np.asarray(x0, dtype=float)
    out = []
    for eps in eps_list:
        try:
            rep = solve_algorithm1(x, problem, config.with_(epsilon=eps))
        except Exception as exc:  # keep sweeping
            logger.warning("eps=%g failed: %s", eps, exc)
            out.append(SweepPoint(eps, None, np.nan, None, str(exc)))
            continue
        err = "" if rep.converged else f"{rep.reason}: {rep.message}".rstrip(": ")
        out.append(SweepPoint(eps, rep.x.copy(), j_value(rep.x, problem), rep, err))
        if rep.converged:
            x = rep.x
    return out


def _sign(s):
    return 1.0 if s >= 0 else 0.0


def scalar_fixed_point_map(x, g, beta, eps):
    """Closed form of one fixed-point step for ``1/2 x^2 + beta psi_eps(x - g)``."""
    s = x - g
    num = x + beta * max(s, 0.0) / max(s, eps)
    den = 1.0 + beta * _sign(s) / max(s, eps)
    return x - num / den


def scalar_newton_map(x, g, beta, eps):
    """Newton-type map for the same problem with the denominator frozen at ``1/eps``."""
    s = x - g
    num = x + beta * max(s, 0.0) / max(s, eps)
    den = 1.0 + beta * _sign(s) / eps
    return x - num / den
