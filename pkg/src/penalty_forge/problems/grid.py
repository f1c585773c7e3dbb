"""Uniform grids on the unit square and the discrete operators built on them.

Grid functions on the ``(n-1)^2`` interior nodes are flattened with the x
index running fastest, i.e. ``u[i-1 + (j-1)(n-1)] = u(x_i, y_j)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..linalg import finalize_triplets

__all__ = [
    "GridSpec",
    "distance_to_boundary",
    "assemble_fd_laplacian",
    "fd_laplacian_min_eigenvalue",
    "q1_element_stiffness",
    "q1_stiffness_full",
]


@dataclass(frozen=True)
class GridSpec:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs n >= 2 subdivisions, got {self.n!r}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def interior_count(self) -> int:
        return (self.n - 1) ** 2

    def interior_coordinates(self):
        """``(X, Y)`` of interior nodes, each flattened in grid order."""
        t = np.arange(1, self.n) * self.h
        X, Y = np.meshgrid(t, t, indexing="xy")
        return X.ravel(), Y.ravel()

    def to_grid(self, v):
        """Interior vector -> ``(n-1, n-1)`` array indexed ``[j, i]`` (row = y)."""
        return np.asarray(v).reshape(self.n - 1, self.n - 1)

    def from_grid(self, a):
        return np.asarray(a).reshape(-1)


def distance_to_boundary(x, y):
    """Distance from ``(x, y)`` in the closed unit square to its boundary."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((x < 0) | (x > 1) | (y < 0) | (y > 1)):
        raise ValueError("point outside the unit square")
    d = 0.5 * (1.0 - np.maximum(np.abs(2 * x - 1), np.abs(2 * y - 1)))
    return float(d) if d.ndim == 0 else d


def _lap1d(m, h):
    return sp.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1]) / h**2


def assemble_fd_laplacian(grid: GridSpec):
    """Five-point ``-Delta`` on interior nodes with homogeneous Dirichlet data.

    Symmetric positive definite; interior rows carry ``4/h^2`` on the
    diagonal and ``-1/h^2`` for each neighbour.
    """
    if grid.n < 3:
        raise ValueError("finite-difference Laplacian needs n >= 3")
    m = grid.n - 1
    T = _lap1d(m, grid.h)
    I = sp.identity(m)
    return (sp.kron(I, T) + sp.kron(T, I)).tocsr()


def fd_laplacian_min_eigenvalue(grid: GridSpec) -> float:
    """Smallest eigenvalue ``(8/h^2) sin^2(pi h / 2)`` of :func:`assemble_fd_laplacian`."""
    return 8.0 / grid.h**2 * np.sin(np.pi * grid.h / 2) ** 2


def q1_element_stiffness():
    """Bilinear element stiffness on a square, nodes counter-clockwise.

    Independent of the element size in 2-D.
    """
    return np.array([[4, -1, -2, -1],
                     [-1, 4, -1, -2],
                     [-2, -1, 4, -1],
                     [-1, -2, -1, 4]], dtype=float) / 6.0


def q1_stiffness_full(grid: GridSpec):
    """Stiffness matrix on all ``(n+1)^2`` nodes (x index fastest), no boundary elimination."""
    n = grid.n
    Ke = q1_element_stiffness()
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    i, j = i.ravel(), j.ravel()
    nodes = np.stack([
        i + j * (n + 1),
        (i + 1) + j * (n + 1),
        (i + 1) + (j + 1) * (n + 1),
        i + (j + 1) * (n + 1),
    ], axis=1)
    rows = np.repeat(nodes, 4, axis=1).ravel()
    cols = np.tile(nodes, (1, 4)).ravel()
    vals = np.tile(Ke.ravel(), n * n)
    N = (n + 1) ** 2
    return finalize_triplets(rows, cols, vals, (N, N))
