"""Exact and regularized max-penalty functionals.

The constrained problem ``min F(x)  s.t.  Gx <= g`` is replaced by the
unconstrained functional

    J_eps(x) = F(x) + beta * sum_i phi_eps((Gx - g)_i)

where ``phi_eps`` is the C^1 smoothing of ``max(0, s)`` that is quadratic on
``[0, eps]``.  The diagonal weights ``chi_eps`` and the companion vector
``f_eps`` rewrite the stationarity condition of ``J_eps`` as a linear system
in ``x`` with frozen coefficients; every solver in the package is driven by
them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ConstraintSystem",
    "QuadraticObjective",
    "GeneralObjective",
    "PenaltyProblem",
    "DiagonalWeights",
    "phi_eps",
    "phi_eps_prime",
    "psi_eps",
    "psi_exact",
    "chi_f_weights",
    "j_eps_value",
    "j_eps_gradient",
    "j_value",
    "scaled_tol",
]


def _check_eps(eps):
    if not np.isfinite(eps) or eps <= 0:
        raise ValueError(f"eps must be positive, got {eps!r}")


def scaled_tol(value, tol):
    """Absolute tolerance below magnitude 1, relative above it."""
    return tol * max(1.0, abs(float(value)))


def _as_operator_matrix(M):
    if sp.issparse(M):
        return sp.csr_matrix(M)
    return np.atleast_2d(np.asarray(M, dtype=float))


# ---------------------------------------------------------------------------
# problem data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintSystem:
    """Unilateral constraints ``G x <= g`` (G is m x n, sparse or dense)."""

    G: object
    g: np.ndarray

    def __post_init__(self):
        G = _as_operator_matrix(self.G)
        g = np.atleast_1d(np.asarray(self.g, dtype=float))
        if G.ndim != 2 or g.ndim != 1 or G.shape[0] != g.shape[0]:
            raise ValueError(
                f"constraint shapes inconsistent: G {G.shape}, g {g.shape}"
            )
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "g", g)

    @property
    def m(self) -> int:
        return self.G.shape[0]

    @property
    def n(self) -> int:
        return self.G.shape[1]

    def residual(self, x):
        """Return ``Gx - g``."""
        return self.G @ x - self.g

    @classmethod
    def bilateral(cls, G, lower, upper):
        """Stack ``lower <= Gx <= upper`` as ``[G; -G] x <= [upper; -lower]``."""
        G = _as_operator_matrix(G)
        lower = np.broadcast_to(np.asarray(lower, dtype=float), (G.shape[0],))
        upper = np.broadcast_to(np.asarray(upper, dtype=float), (G.shape[0],))
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        if sp.issparse(G):
            stacked = sp.vstack([G, -G], format="csr")
        else:
            stacked = np.vstack([G, -G])
        return cls(stacked, np.concatenate([upper, -lower]))


@dataclass(frozen=True)
class QuadraticObjective:
    """``F(x) = 1/2 (x, A x) - (b, x)`` with symmetric ``A``."""

    A: object
    b: np.ndarray

    def __post_init__(self):
        A = _as_operator_matrix(self.A)
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape != (b.size, b.size):
            raise ValueError(f"A has shape {A.shape}, expected {(b.size, b.size)}")
        asym = abs(A - A.T)
        asym = asym.max() if asym.size else 0.0
        scale = abs(A).max() if A.size else 0.0
        if asym > 1e-14 * max(scale, 1e-300):
            raise ValueError("quadratic objective requires a symmetric A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    kind = "quadratic"

    @property
    def n(self) -> int:
        return self.b.size

    def value(self, x):
        return 0.5 * float(x @ (self.A @ x)) - float(self.b @ x)

    def gradient(self, x):
        return self.A @ x - self.b

    def hessian(self, x=None):
        return self.A


@dataclass(frozen=True)
class GeneralObjective:
    """Objective given by evaluators.

    ``hessian`` is optional; it may return a matrix or a
    ``scipy.sparse.linalg.LinearOperator`` and is only needed by the
    semismooth Newton and primal-dual active set solvers.
    """

    n: int
    value_fn: Callable[[np.ndarray], float]
    gradient_fn: Callable[[np.ndarray], np.ndarray]
    hessian_fn: Optional[Callable[[np.ndarray], object]] = None

    kind = "general"

    def value(self, x):
        return float(self.value_fn(x))

    def gradient(self, x):
        return np.asarray(self.gradient_fn(x), dtype=float)

    def hessian(self, x):
        if self.hessian_fn is None:
            raise NotImplementedError("objective provides no Hessian evaluator")
        return self.hessian_fn(x)


@dataclass(frozen=True)
class PenaltyProblem:
    """Objective plus constraints plus penalty weight ``beta``.

    Parameters
    ----------
    objective : QuadraticObjective or GeneralObjective
    constraints : ConstraintSystem
    beta : float
        Penalty weight, must be positive.
    preconditioner : matrix, optional
        Problem-recommended SPD matrix ``P`` for the fixed-point step.
    step_solver : callable, optional
        ``step_solver(x, weights, alpha, beta, rhs) -> d`` solving
        ``(alpha P + beta G^T chi G) d = rhs`` for a preconditioner that is
        too expensive to assemble (inverse source problem).
    name : str
        Label used in reports.
    """

    objective: object
    constraints: ConstraintSystem
    beta: float
    preconditioner: object = None
    step_solver: Optional[Callable] = None
    name: str = "problem"
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta!r}")
        if self.objective.n != self.constraints.n:
            raise ValueError(
                f"objective has n={self.objective.n} but G has "
                f"{self.constraints.n} columns"
            )

    @property
    def n(self) -> int:
        return self.constraints.n

    @property
    def m(self) -> int:
        return self.constraints.m

    @property
    def is_quadratic(self) -> bool:
        return self.objective.kind == "quadratic"

    def replace(self, **changes) -> "PenaltyProblem":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class DiagonalWeights:
    """Diagonal reweighting matrix with its activity mask."""

    entries: np.ndarray
    active_mask: np.ndarray

    @property
    def active_count(self) -> int:
        return int(np.count_nonzero(self.active_mask))

    def as_matrix(self):
        return sp.diags(self.entries, format="csr")


# ---------------------------------------------------------------------------
# scalar smoothing
# ---------------------------------------------------------------------------


def phi_eps(s, eps):
    """Smoothed ``max(0, s)``: ``eps/2`` below 0, quadratic on ``[0, eps]``,
    identity above ``eps``."""
    _check_eps(eps)
    s = np.asarray(s, dtype=float)
    c = np.clip(s, 0.0, eps)
    out = np.where(s >= eps, s, c * c / (2 * eps) + 0.5 * eps)
    return float(out) if out.ndim == 0 else out


def phi_eps_prime(s, eps):
    """Derivative of :func:`phi_eps`, i.e. ``max(0, s) / max(eps, s)``."""
    _check_eps(eps)
    s = np.asarray(s, dtype=float)
    out = np.maximum(s, 0.0) / np.maximum(s, eps)
    return float(out) if out.ndim == 0 else out


def psi_eps(y, eps):
    """Sum of :func:`phi_eps` over the components of ``y``."""
    return float(np.sum(phi_eps(np.atleast_1d(y), eps)))


def psi_exact(y):
    """Non-smooth penalty ``sum_i max(0, y_i)``."""
    return float(np.sum(np.maximum(np.atleast_1d(np.asarray(y, dtype=float)), 0.0)))


# ---------------------------------------------------------------------------
# reweighting and functional evaluation
# ---------------------------------------------------------------------------


def weights_from_residual(r, g, eps):
    """``chi`` and ``f`` from a precomputed residual ``r = Gx - g``.

    Rows with ``r_j >= 0`` (zero included) are active.
    """
    _check_eps(eps)
    active = r >= 0
    denom = np.maximum(eps, r)
    chi = np.where(active, 1.0 / denom, 0.0)
    f = np.where(active, g / denom, 0.0)
    return DiagonalWeights(chi, active), f


def chi_f_weights(x, problem: PenaltyProblem, eps):
    """Reweighting diagonal ``chi_eps(x)`` and vector ``f_eps(x)``.

    Both come from the same residual so the activity mask is shared; for
    every row ``chi_j (Gx)_j - f_j == phi_eps_prime((Gx - g)_j)``.

    Returns
    -------
    weights : DiagonalWeights
    f : numpy.ndarray
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({problem.n},)")
    cons = problem.constraints
    return weights_from_residual(cons.residual(x), cons.g, eps)


def j_eps_value(x, problem: PenaltyProblem, eps):
    """``F(x) + beta * psi_eps(Gx - g)``."""
    x = np.asarray(x, dtype=float)
    r = problem.constraints.residual(x)
    return problem.objective.value(x) + problem.beta * psi_eps(r, eps)


def j_eps_gradient(x, problem: PenaltyProblem, eps):
    """``F'(x) + beta G^T phi_eps'(Gx - g)``."""
    x = np.asarray(x, dtype=float)
    cons = problem.constraints
    r = cons.residual(x)
    return problem.objective.gradient(x) + problem.beta * (cons.G.T @ phi_eps_prime(r, eps))


def j_value(x, problem: PenaltyProblem):
    """Exact (non-smooth) penalty functional ``F(x) + beta * psi(Gx - g)``."""
    x = np.asarray(x, dtype=float)
    return problem.objective.value(x) + problem.beta * psi_exact(problem.constraints.residual(x))
