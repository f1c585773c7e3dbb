"""Bound-constrained Tikhonov reconstructions on the unit square.

* inverse source: recover ``u`` in ``-Delta y = u`` from noisy ``y``,
  ``0 <= u <= 1``;
* inverse medium: recover ``u`` in ``-Delta y + u y = f`` from noisy ``y``,
  ``0 <= u <= U``.

Both discretize ``-Delta`` by the five-point stencil with Dirichlet data and
use the plain Euclidean misfit ``1/2 ||y(u) - y_delta||^2 + eta/2 ||u||^2``.
Gradients come from one forward and one adjoint solve.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..linalg import spd_solve
from ..penalty import ConstraintSystem, GeneralObjective, PenaltyProblem
from ..solvers.base import StepSolveError
from .grid import GridSpec, assemble_fd_laplacian, fd_laplacian_min_eigenvalue

__all__ = [
    "NoiseSpec",
    "add_noise",
    "square_indicator",
    "InverseSourceInstance",
    "assemble_inverse_source",
    "InverseMediumInstance",
    "assemble_inverse_medium",
]

NOISE_MODES = ("additive-uniform", "relative-max")


@dataclass(frozen=True)
class NoiseSpec:
    """Uniform noise on ``[-1, 1]`` scaled by ``delta`` (``additive-uniform``)
    or by ``delta * max(y)`` (``relative-max``)."""

    delta: float = 0.0
    mode: str = "additive-uniform"

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("noise level delta must be nonnegative")
        if self.mode not in NOISE_MODES:
            raise ValueError(f"unknown noise mode {self.mode!r}; expected one of {NOISE_MODES}")


def add_noise(y, spec: NoiseSpec, seed=None):
    """Return ``y`` plus seeded uniform noise as described by ``spec``."""
    y = np.asarray(y, dtype=float)
    if spec.delta == 0:
        return y.copy()
    rand = np.random.default_rng(seed).uniform(-1.0, 1.0, size=y.shape)
    scale = spec.delta if spec.mode == "additive-uniform" else spec.delta * float(np.max(y))
    return y + scale * rand


def square_indicator(grid: GridSpec, side=0.4, height=1.0):
    """``height`` on the centered square of the given side, 0 elsewhere."""
    X, Y = grid.interior_coordinates()
    half = side / 2
    inside = (np.abs(X - 0.5) <= half + 1e-12) & (np.abs(Y - 0.5) <= half + 1e-12)
    return np.where(inside, float(height), 0.0)


def _box_rows(N, upper):
    return ConstraintSystem.bilateral(sp.identity(N, format="csr"), 0.0, upper)


def _weighted_gram(G, weights):
    return (G.T @ sp.diags(weights.entries) @ G).tocsr()


@dataclass(frozen=True)
class InverseSourceInstance:
    grid: GridSpec
    K: sp.csr_matrix
    y_delta: np.ndarray
    eta: float
    u_star: np.ndarray
    y_clean: np.ndarray
    noise: NoiseSpec = NoiseSpec()
    seed: object = None
    _lu: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self._lu is None:
            object.__setattr__(self, "_lu", spla.splu(sp.csc_matrix(self.K)))

    def forward(self, u):
        """``K^{-1} u``."""
        return self._lu.solve(np.asarray(u, dtype=float))

    def misfit(self, u):
        return float(np.linalg.norm(self.forward(u) - self.y_delta))

    def value(self, u):
        r = self.forward(u) - self.y_delta
        return 0.5 * float(r @ r) + 0.5 * self.eta * float(u @ u)

    def adjoint_state(self, u):
        """``p`` solving ``K p = K^{-1} u - y_delta``."""
        return self._lu.solve(self.forward(u) - self.y_delta)

    def gradient(self, u):
        return self.adjoint_state(u) + self.eta * np.asarray(u, dtype=float)

    def hessian(self, u=None):
        N = self.K.shape[0]
        return spla.LinearOperator((N, N), matvec=lambda v: self._lu.solve(self._lu.solve(v)) + self.eta * v,
                                   dtype=float)

    def step_solver(self, x, weights, alpha, beta, rhs, G=None):
        """Solve ``(alpha (K^{-2} + eta I) + beta G^T chi G) d = rhs`` without inverses.

        With ``d = K z`` the system becomes the sparse SPD system
        ``(alpha (I + eta K^2) + beta K W K) z = K rhs``, ``W = G^T chi G``.
        """
        if G is None:
            G = _box_rows(self.K.shape[0], 1.0).G
        K = self.K
        W = _weighted_gram(G, weights)
        M = alpha * (sp.identity(K.shape[0]) + self.eta * (K @ K)) + beta * (K @ W @ K)
        z, rep = spd_solve(M.tocsr(), K @ rhs)
        if not rep.success:
            raise StepSolveError(f"inverse-source step solve failed: {rep.message}", rep)
        return K @ z

    def problem(self, beta=1.0):
        N = self.K.shape[0]
        cons = _box_rows(N, 1.0)
        obj = GeneralObjective(N, self.value, self.gradient, self.hessian)

        def solver(x, weights, alpha, b, rhs):
            return self.step_solver(x, weights, alpha, b, rhs, G=cons.G)

        return PenaltyProblem(obj, cons, beta, step_solver=solver, name="inverse_source")


def assemble_inverse_source(grid: GridSpec, eta, noise: NoiseSpec = NoiseSpec(), u_star=None,
                            seed=None) -> InverseSourceInstance:
    """Assemble the inverse source instance with data ``y = K^{-1} u*`` plus noise.

    ``u_star`` defaults to :func:`square_indicator`.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    K = assemble_fd_laplacian(grid)
    u_star = square_indicator(grid) if u_star is None else np.asarray(u_star, dtype=float)
    if u_star.shape != (K.shape[0],):
        raise ValueError(f"u_star must have length {K.shape[0]}")
    lu = spla.splu(sp.csc_matrix(K))
    y = lu.solve(u_star)
    if not np.all(np.isfinite(y)):
        raise RuntimeError("forward solve failed")
    y_delta = add_noise(y, noise, seed)
    return InverseSourceInstance(grid, K, y_delta, float(eta), u_star, y, noise, seed, lu)


@dataclass(frozen=True)
class InverseMediumInstance:
    grid: GridSpec
    K: sp.csr_matrix
    f: np.ndarray
    y_delta: np.ndarray
    eta: float
    U: float
    u_star: np.ndarray
    y_clean: np.ndarray
    noise: NoiseSpec = NoiseSpec()
    seed: object = None

    def _factor(self, u):
        u = np.asarray(u, dtype=float)
        if u.min(initial=0.0) <= -fd_laplacian_min_eigenvalue(self.grid):
            raise ValueError("forward operator -Delta + u is indefinite for this u")
        return spla.splu(sp.csc_matrix(self.K + sp.diags(u)))

    def state(self, u):
        """Solution ``y`` of ``(-Delta + u) y = f``."""
        return self._factor(u).solve(self.f)

    def value(self, u):
        r = self.state(u) - self.y_delta
        return 0.5 * float(r @ r) + 0.5 * self.eta * float(u @ u)

    def gradient(self, u):
        lu = self._factor(u)
        y = lu.solve(self.f)
        p = lu.solve(y - self.y_delta)
        return -y * p + self.eta * np.asarray(u, dtype=float)

    def preconditioner(self):
        N = self.K.shape[0]
        return sp.identity(N, format="csr") * (0.01 + self.eta)

    def problem(self, beta=1.0):
        N = self.K.shape[0]
        obj = GeneralObjective(N, self.value, self.gradient)
        return PenaltyProblem(obj, _box_rows(N, self.U), beta,
                              preconditioner=self.preconditioner(), name="inverse_medium")


def assemble_inverse_medium(grid: GridSpec, eta, U=2.0, noise: NoiseSpec = NoiseSpec(mode="relative-max"),
                            u_star=None, f_const=10.0, seed=None) -> InverseMediumInstance:
    """Assemble the inverse medium instance with constant source ``f_const``.

    ``u_star`` defaults to :func:`square_indicator` (height 1) and must lie in
    ``[0, U]``.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    if not U > 0:
        raise ValueError("upper bound U must be positive")
    K = assemble_fd_laplacian(grid)
    u_star = square_indicator(grid) if u_star is None else np.asarray(u_star, dtype=float)
    if u_star.shape != (K.shape[0],):
        raise ValueError(f"u_star must have length {K.shape[0]}")
    if u_star.min() < 0 or u_star.max() > U:
        raise ValueError("u_star must lie in [0, U]")
    f = np.full(K.shape[0], float(f_const))
    y = spla.spsolve(sp.csc_matrix(K + sp.diags(u_star)), f)
    y_delta = add_noise(y, noise, seed)
    return InverseMediumInstance(grid, K, f, y_delta, float(eta), float(U), u_star, y, noise, seed)
