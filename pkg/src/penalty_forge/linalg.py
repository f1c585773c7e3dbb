"""Sparse symmetric matrices, operators and the SPD/saddle-point solves.

Matrices are plain ``numpy`` arrays or ``scipy.sparse`` CSR matrices; the
functions here accept either.  Step systems are solved by a direct
factorization (Cholesky for dense input, SuperLU in symmetric mode for sparse
input) below ``DIRECT_THRESHOLD`` unknowns and by Jacobi-preconditioned CG
above it or for matrix-free operators.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .penalty import DiagonalWeights

__all__ = [
    "DIRECT_THRESHOLD",
    "SpdSolveReport",
    "SingularSystemError",
    "finalize_triplets",
    "is_symmetric",
    "assemble_step_matrix",
    "spd_solve",
    "saddle_solve",
    "check_adjoint",
    "as_dense",
    "read_matrix_market",
    "write_matrix_market",
]

logger = logging.getLogger(__name__)

DIRECT_THRESHOLD = 50_000
_EPS_MACH = np.finfo(float).eps


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when a KKT system is singular; ``block`` names the culprit."""

    def __init__(self, message, block):
        super().__init__(message)
        self.block = block


@dataclass
class SpdSolveReport:
    residual_norm: float
    rhs_norm: float
    method: str
    iterations: int
    success: bool
    at_roundoff_floor: bool = False
    message: str = ""


def finalize_triplets(rows, cols, vals, shape):
    """CSR matrix from COO triplets; duplicates are summed."""
    M = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    M.sum_duplicates()
    M.eliminate_zeros()
    return M


def is_symmetric(M, rtol=1e-14):
    if isinstance(M, spla.LinearOperator):
        raise TypeError("symmetry of a matrix-free operator cannot be checked here")
    diff = abs(M - M.T)
    dmax = diff.max() if (diff.nnz if sp.issparse(diff) else diff.size) else 0.0
    scale = abs(M).max() if (M.nnz if sp.issparse(M) else M.size) else 0.0
    return dmax <= rtol * scale


def as_dense(M):
    if sp.issparse(M):
        return M.toarray()
    if isinstance(M, spla.LinearOperator):
        return M.matmat(np.eye(M.shape[1]))
    return np.asarray(M, dtype=float)


def _gram(G, chi: DiagonalWeights):
    """``G^T diag(chi) G`` restricted to the active rows."""
    mask = chi.active_mask
    w = chi.entries[mask]
    if sp.issparse(G):
        Ga = G[np.flatnonzero(mask)]
        return (Ga.T @ sp.diags(w) @ Ga).tocsr()
    Ga = np.asarray(G)[mask]
    return (Ga.T * w) @ Ga


def assemble_step_matrix(alpha, P, beta, G, chi: DiagonalWeights, A=None):
    """``alpha P + beta G^T chi G`` (plus ``A`` when given).

    The result is sparse if any of the inputs is sparse, dense otherwise.
    ``alpha = 0`` is only accepted together with ``A``.
    """
    if alpha < 0 or (alpha == 0 and A is None):
        raise ValueError("alpha must be positive (alpha = 0 requires A)")
    n = G.shape[1]
    if P.shape != (n, n):
        raise ValueError(f"P has shape {P.shape}, expected {(n, n)}")
    if A is not None and A.shape != (n, n):
        raise ValueError(f"A has shape {A.shape}, expected {(n, n)}")
    if chi.entries.shape != (G.shape[0],):
        raise ValueError("chi length does not match the number of constraint rows")
    sparse = sp.issparse(P) or sp.issparse(G) or (A is not None and sp.issparse(A))
    if sparse:
        M = alpha * sp.csr_matrix(P) + beta * sp.csr_matrix(_gram(sp.csr_matrix(G), chi))
        if A is not None:
            M = M + sp.csr_matrix(A)
        M = M.tocsr()
        M.sum_duplicates()
        empty = M.nnz == 0 or not np.any(M.data)
    else:
        M = alpha * np.asarray(P, dtype=float) + beta * _gram(np.asarray(G, dtype=float), chi)
        if A is not None:
            M = M + np.asarray(A, dtype=float)
        empty = not np.any(M)
    if empty:
        raise ValueError("assembled step matrix is identically zero")
    return M


def _fro(M):
    if sp.issparse(M):
        return float(np.sqrt((M.data**2).sum()))
    return float(np.linalg.norm(M))


def _residual(M, x, r):
    return float(np.linalg.norm(M @ x - r))


def _refine(solve, M, r, x, tol, rnorm, max_refine=3):
    res = _residual(M, x, r)
    for _ in range(max_refine):
        if res <= tol * max(1.0, rnorm):
            break
        x_new = x + solve(r - M @ x)
        res_new = _residual(M, x_new, r)
        if not res_new < res:
            break
        x, res = x_new, res_new
    return x, res


def _finish(M, x, r, res, rnorm, method, iterations, tol, ok=True, message=""):
    within = res <= tol * max(1.0, rnorm)
    # the floor needs two extra norms; only pay for them when the tolerance is missed
    at_floor = (not within) and res <= 1e3 * _EPS_MACH * (_fro(M) * float(np.linalg.norm(x)) + rnorm)
    success = bool(ok and np.all(np.isfinite(x)) and (within or at_floor))
    if ok and not success and not message:
        message = f"residual {res:.3e} above tolerance and roundoff floor"
    return x, SpdSolveReport(res, rnorm, method, iterations, success, at_floor, message)


def spd_solve(M, r, tol=1e-12, *, x0=None, direct_threshold=DIRECT_THRESHOLD, maxiter=None):
    """Solve ``M x = r`` for symmetric positive definite ``M``.

    Parameters
    ----------
    M : ndarray, sparse matrix or LinearOperator
    r : ndarray
    tol : float
        Target ``||M x - r|| <= tol * max(1, ||r||)``.  Residuals that reach
        the roundoff floor of the factorization are accepted and marked in the
        report.
    x0 : ndarray, optional
        Warm start; only the correction ``M^{-1}(r - M x0)`` is solved for.

    Returns
    -------
    x : ndarray
    report : SpdSolveReport
        ``success`` is False on a factorization breakdown, a detected
        indefinite pivot or an unreached tolerance.
    """
    r = np.asarray(r, dtype=float)
    n = r.shape[0]
    if M.shape != (n, n):
        raise ValueError(f"matrix shape {M.shape} does not match rhs length {n}")
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        dx, rep = spd_solve(M, r - M @ x0, tol, direct_threshold=direct_threshold, maxiter=maxiter)
        x = x0 + dx
        res = _residual(M, x, r)
        return _finish(M, x, r, res, float(np.linalg.norm(r)), rep.method, rep.iterations, tol,
                       ok=rep.success, message=rep.message)

    rnorm = float(np.linalg.norm(r))
    if rnorm == 0.0:
        return np.zeros(n), SpdSolveReport(0.0, 0.0, "trivial", 0, True)

    if isinstance(M, spla.LinearOperator) or (sp.issparse(M) and n > direct_threshold):
        return _cg_solve(M, r, tol, rnorm, maxiter)

    if sp.issparse(M):
        M = sp.csc_matrix(M)
        try:
            lu = spla.splu(M, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
        except RuntimeError as exc:
            x = np.full(n, np.nan)
            return x, SpdSolveReport(np.inf, rnorm, "splu", 0, False, message=str(exc))
        if np.array_equal(lu.perm_r, lu.perm_c) and np.any(lu.U.diagonal() <= 0):
            x = lu.solve(r)
            return x, SpdSolveReport(_residual(M, x, r), rnorm, "splu", 0, False,
                                     message="non-positive pivot: matrix is not positive definite")
        x = lu.solve(r)
        x, res = _refine(lu.solve, M, r, x, tol, rnorm)
        return _finish(M, x, r, res, rnorm, "splu", 0, tol)

    M = np.asarray(M, dtype=float)
    try:
        cf = sla.cho_factor(M, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        x = np.full(n, np.nan)
        return x, SpdSolveReport(np.inf, rnorm, "cholesky", 0, False,
                                 message=f"Cholesky breakdown: {exc}")

    def solve(v):
        return sla.cho_solve(cf, v, check_finite=False)

    x = solve(r)
    x, res = _refine(solve, M, r, x, tol, rnorm)
    return _finish(M, x, r, res, rnorm, "cholesky", 0, tol)


def _cg_solve(M, r, tol, rnorm, maxiter):
    n = r.shape[0]
    if sp.issparse(M):
        d = M.diagonal()
        if np.any(d <= 0):
            return np.full(n, np.nan), SpdSolveReport(
                np.inf, rnorm, "pcg", 0, False, message="non-positive diagonal entry")
        Minv = spla.LinearOperator((n, n), matvec=lambda v: v / d)
    else:
        Minv = None
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.cg(M, r, rtol=tol * max(1.0, rnorm) / rnorm, atol=0.0,
                      maxiter=maxiter or 10 * n, M=Minv, callback=cb)
    res = _residual(M, x, r)
    if info < 0:
        return x, SpdSolveReport(res, rnorm, "pcg", count[0], False, message="CG breakdown")
    if sp.issparse(M):
        return _finish(M, x, r, res, rnorm, "pcg", count[0], tol)
    # matrix-free: no norm estimate for a roundoff floor, trust CG's own exit
    ok = info == 0 or res <= tol * max(1.0, rnorm)
    return x, SpdSolveReport(res, rnorm, "pcg", count[0], bool(ok),
                             message="" if ok else "CG iteration limit reached")


def _rank(G):
    return int(np.linalg.matrix_rank(as_dense(G))) if G.shape[0] else 0


def saddle_solve(A, G_active, b, g_active, reg=0.0):
    """Solve ``[A  G^T; G  -reg I] [x; mu] = [b; g]`` on the active rows.

    With ``reg = 0`` this is the exact primal-dual active set step.  A
    singular system raises :class:`SingularSystemError` naming the deficient
    block.
    """
    if reg < 0:
        raise ValueError("reg must be nonnegative")
    b = np.asarray(b, dtype=float)
    g_active = np.atleast_1d(np.asarray(g_active, dtype=float))
    n = b.size
    k = g_active.size
    if isinstance(A, spla.LinearOperator):
        A = as_dense(A)
    if A.shape != (n, n):
        raise ValueError(f"A has shape {A.shape}, expected {(n, n)}")
    if k == 0:
        G_active = np.zeros((0, n))
    if G_active.shape != (k, n):
        raise ValueError(f"G_active has shape {G_active.shape}, expected {(k, n)}")

    rhs = np.concatenate([b, g_active])
    if sp.issparse(A) or sp.issparse(G_active):
        K = sp.bmat([[sp.csr_matrix(A), sp.csr_matrix(G_active).T],
                     [sp.csr_matrix(G_active), -reg * sp.identity(k) if k else None]],
                    format="csc")
        try:
            sol = spla.splu(K).solve(rhs)
            singular = not np.all(np.isfinite(sol))
        except RuntimeError:
            singular = True
    else:
        K = np.block([[np.asarray(A, dtype=float), np.asarray(G_active, dtype=float).T],
                      [np.asarray(G_active, dtype=float), -reg * np.eye(k)]])
        try:
            with warnings.catch_warnings():
                # singularity is detected from the pivots below
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                lu = sla.lu_factor(K, check_finite=True)
            piv = np.abs(np.diag(lu[0]))
            singular = piv.min() <= 1e3 * _EPS_MACH * max(piv.max(), 1e-300) * (n + k)
            sol = sla.lu_solve(lu, rhs) if not singular else None
        except (np.linalg.LinAlgError, ValueError):
            singular = True
    if not singular:
        res = np.linalg.norm(K @ sol - rhs)
        scale = _fro(K) * np.linalg.norm(sol) + np.linalg.norm(rhs)
        singular = not res <= 1e6 * _EPS_MACH * max(scale, 1e-300)
    if singular:
        if k and reg == 0 and _rank(G_active) < k:
            raise SingularSystemError(
                f"KKT system singular: constraint block G_active ({k} rows) is rank deficient",
                block="constraint")
        raise SingularSystemError(
            "KKT system singular: Hessian block A is singular on the null space of G_active",
            block="hessian")
    return sol[:n], sol[n:]


def check_adjoint(op, n_probes=5, rng=None):
    """Largest relative defect of ``<Op x, y> = <x, Op^T y>`` over random probes."""
    rng = np.random.default_rng(rng)
    op = spla.aslinearoperator(op)
    worst = 0.0
    for _ in range(n_probes):
        x = rng.standard_normal(op.shape[1])
        y = rng.standard_normal(op.shape[0])
        lhs = float(op.matvec(x) @ y)
        rhs = float(x @ op.rmatvec(y))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return worst


def write_matrix_market(path, M, comment=""):
    """Write a sparse matrix (coordinate format) or a vector (array format)."""
    if sp.issparse(M):
        scipy.io.mmwrite(str(path), sp.coo_matrix(M), comment=comment, precision=17)
    else:
        arr = np.asarray(M, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        scipy.io.mmwrite(str(path), arr, comment=comment, precision=17)


def read_matrix_market(path):
    """Read back what :func:`write_matrix_market` wrote; column vectors are flattened."""
    M = scipy.io.mmread(str(path))
    if sp.issparse(M):
        return sp.csr_matrix(M)
    M = np.asarray(M, dtype=float)
    return M[:, 0] if M.ndim == 2 and M.shape[1] == 1 else M
