"""Scalar model problem and seeded random convex QPs."""
from __future__ import annotations

import numpy as np

from ..penalty import ConstraintSystem, PenaltyProblem, QuadraticObjective

__all__ = ["scalar_problem", "scalar_fixed_point", "random_convex_qp", "random_box_qp", "duplicate_row_qp"]


def scalar_problem(g=-1.0, beta=2.0):
    """``min 1/2 x^2 + beta psi_eps(x - g)`` as a 1-D penalty problem (dense)."""
    obj = QuadraticObjective(np.array([[1.0]]), np.array([0.0]))
    cons = ConstraintSystem(np.array([[1.0]]), np.array([float(g)]))
    return PenaltyProblem(obj, cons, beta, preconditioner=np.array([[1.0]]), name="scalar")


def scalar_fixed_point(g, beta, eps):
    """Closed-form regularized minimizer of :func:`scalar_problem`.

    ``beta g / (beta + eps)`` when ``g < 0`` (the constraint binds), else 0.
    """
    return beta * g / (beta + eps) if g < 0 else 0.0


def random_convex_qp(rng, n, m, beta=1.0, cond=10.0, shift=1.0):
    """Strictly convex QP with a general constraint matrix.

    ``A = Q diag(s) Q^T`` with eigenvalues in ``[1, cond]``; ``G`` is Gaussian.
    ``g`` leaves a random point near the unconstrained minimizer strictly
    feasible, so the QP is always feasible while typically several rows cut
    off the unconstrained minimizer.
    """
    rng = np.random.default_rng(rng)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    s = np.exp(rng.uniform(0.0, np.log(cond), n))
    A = (Q * s) @ Q.T
    A = 0.5 * (A + A.T)
    b = rng.standard_normal(n) * 2.0
    G = rng.standard_normal((m, n))
    x_free = np.linalg.solve(A, b)
    x_in = x_free + shift * rng.standard_normal(n)
    g = G @ x_in + rng.uniform(0.05, 0.5, m)
    return PenaltyProblem(QuadraticObjective(A, b), ConstraintSystem(G, g), beta, name="qp")


def random_box_qp(rng, n, m, beta=1.0):
    """Convex QP with one-sided bounds on ``m`` distinct coordinates.

    ``A`` is a strictly diagonally dominant Stieltjes matrix (positive
    diagonal, nonpositive off-diagonal) as produced by discretized elliptic
    operators; rows of ``G`` are ``+e_i`` or ``-e_i``.
    """
    if m > n:
        raise ValueError("box QP needs m <= n")
    rng = np.random.default_rng(rng)
    off = -rng.uniform(0.0, 1.0, (n, n)) * (rng.uniform(size=(n, n)) < 0.6)
    off = np.triu(off, 1)
    off = off + off.T
    A = off + np.diag(-off.sum(axis=1) + rng.uniform(0.2, 2.0, n))
    b = rng.standard_normal(n) * 3.0
    idx = rng.choice(n, size=m, replace=False)
    signs = rng.choice([-1.0, 1.0], size=m)
    G = np.zeros((m, n))
    G[np.arange(m), idx] = signs
    x_free = np.linalg.solve(A, b)
    g = G @ x_free + rng.uniform(-1.0, 0.5, m)
    return PenaltyProblem(QuadraticObjective(A, b), ConstraintSystem(G, g), beta, name="box_qp")


def duplicate_row_qp(n=2, beta=1.0):
    """``min 1/2 |x|^2 - 2 sum x`` subject to ``x_1 <= 0`` written twice.

    Both copies are violated at the unconstrained minimizer, so the active
    set of a primal-dual step contains two identical rows and the
    unregularized KKT matrix is singular.  The penalty formulation is
    unaffected (solution ``x_1 = 0``, others 2).
    """
    if n < 1:
        raise ValueError("n must be positive")
    G = np.zeros((2, n))
    G[:, 0] = 1.0
    obj = QuadraticObjective(np.eye(n), np.full(n, 2.0))
    return PenaltyProblem(obj, ConstraintSystem(G, np.zeros(2)), beta, name="duplicate_qp")
