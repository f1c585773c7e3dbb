"""Obstacle problem on the unit square with bilinear finite elements.

Minimize ``1/2 int |grad u|^2 - C int u`` over ``H^1_0`` functions lying below
the distance to the boundary.  Dirichlet nodes are eliminated, so unknowns and
constraints live on the ``(n-1)^2`` interior nodes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..penalty import ConstraintSystem, PenaltyProblem, QuadraticObjective
from .grid import GridSpec, distance_to_boundary, q1_stiffness_full

__all__ = ["ObstacleInstance", "assemble_obstacle", "interior_index"]


def interior_index(grid: GridSpec):
    """Indices of interior nodes inside the full ``(n+1)^2`` node numbering."""
    n = grid.n
    i, j = np.meshgrid(np.arange(1, n), np.arange(1, n), indexing="xy")
    return (i + j * (n + 1)).ravel()


@dataclass(frozen=True)
class ObstacleInstance:
    grid: GridSpec
    H: sp.csr_matrix
    F: np.ndarray
    g: np.ndarray
    C: float
    bilateral: bool = False

    def problem(self, beta=0.01):
        """Penalty problem ``1/2 U^T H U - F^T U`` with ``U <= g``.

        With ``bilateral`` the constraint is ``-g <= U <= g`` stacked into
        ``2 (n-1)^2`` rows.  The stiffness matrix is the recommended
        preconditioner.
        """
        N = self.F.size
        I = sp.identity(N, format="csr")
        if self.bilateral:
            cons = ConstraintSystem.bilateral(I, -self.g, self.g)
        else:
            cons = ConstraintSystem(I, self.g)
        return PenaltyProblem(QuadraticObjective(self.H, self.F), cons, beta,
                              preconditioner=self.H, name="obstacle")

    def initial_guess(self):
        """Start at the obstacle: from there the iteration decreases ``J_eps`` from step one."""
        return self.g.copy()

    def energy(self, U):
        return 0.5 * float(U @ (self.H @ U)) - float(self.F @ U)


def assemble_obstacle(grid: GridSpec, C=10.0, bilateral=False) -> ObstacleInstance:
    """Assemble stiffness, load and nodal obstacle on interior nodes.

    The load is ``C h^2`` per interior node (each hat function integrates to
    ``h^2``); the obstacle is the distance to the boundary at each node.
    """
    if grid.n < 3:
        raise ValueError("obstacle problem needs n >= 3")
    idx = interior_index(grid)
    H = q1_stiffness_full(grid)[idx][:, idx].tocsr()
    F = np.full(idx.size, C * grid.h**2)
    X, Y = grid.interior_coordinates()
    g = distance_to_boundary(X, Y)
    return ObstacleInstance(grid, H, F, np.asarray(g, dtype=float), float(C), bilateral)
