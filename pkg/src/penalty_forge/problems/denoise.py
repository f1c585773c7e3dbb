"""Nonsmooth Tikhonov denoising by the same reweighted fixed-point iteration.

Two functionals on an ``n x n`` image ``f`` (vectorized column-major, first
index fastest):

* multi-parameter:
  ``1/2 ||u - f||^2 + eta1 sum (phi(D_x u) + phi(D_y u)) + eta2 sum phi(H u)``
  with ``phi = |.|`` and plain Euclidean sums;
* isotropic total variation:
  ``dA (1/2 ||u - f||^2 + w sum phi(r_i))``, ``r_i = |(D_x u, D_y u)_i|``,
  ``dA = h^2`` the cell area.

``D_x``, ``D_y`` are forward differences divided by ``h`` (zero in the last
row/column) and ``H = -(D_x^T D_x + D_y^T D_y)`` is the symmetric five-point
Laplacian with Neumann closure, so all three annihilate constants.  ``phi``
is replaced by its ``eps``-smoothing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..linalg import spd_solve
from ..penalty import DiagonalWeights, phi_eps, scaled_tol
from ..solvers.base import IterateTrace, SolveReport, StepSolveError, TraceRecord
from .inverse import NoiseSpec, add_noise

__all__ = [
    "DenoiseInstance",
    "difference_operators",
    "synthetic_image",
    "make_denoise_instance",
    "abs_eps",
    "abs_eps_prime",
    "abs_weights",
    "multiparam_energy",
    "multiparam_gradient",
    "denoise_step_multiparam",
    "tv_weights",
    "tv_penalty",
    "tv_penalty_gradient",
    "tv_energy",
    "tv_gradient",
    "denoise_step_tv",
    "solve_denoise",
    "tv1d_energy",
    "tv1d_gradient",
    "tv1d_step",
    "solve_tv1d",
    "psnr",
]


def difference_operators(n, h=None):
    """Return ``(D_x, D_y, H)`` for an ``n x n`` image."""
    h = 1.0 / n if h is None else h
    e = np.ones(n)
    D1 = sp.diags([-e, e[:-1]], [0, 1], shape=(n, n)).tolil()
    D1[n - 1, :] = 0
    D1 = D1.tocsr() / h
    I = sp.identity(n, format="csr")
    Dx = sp.kron(I, D1, format="csr")
    Dy = sp.kron(D1, I, format="csr")
    H = -(Dx.T @ Dx + Dy.T @ Dy).tocsr()
    return Dx, Dy, H


def synthetic_image(n=32):
    """Piecewise-constant test image: a bright square and a mid-gray disk."""
    t = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(t, t, indexing="ij")
    img = np.zeros((n, n))
    img[(np.abs(X - 0.3) < 0.15) & (np.abs(Y - 0.3) < 0.15)] = 1.0
    img[(X - 0.68) ** 2 + (Y - 0.65) ** 2 < 0.2**2] = 0.5
    return img


@dataclass(frozen=True)
class DenoiseInstance:
    n: int
    f: np.ndarray
    Dx: sp.csr_matrix
    Dy: sp.csr_matrix
    H: sp.csr_matrix
    eta1: float = 0.0
    eta2: float = 0.0
    tv_weight: float = 0.0
    u_clean: np.ndarray = None

    @property
    def cell_area(self):
        return 1.0 / self.n**2

    def image(self, u):
        return np.asarray(u).reshape(self.n, self.n, order="F")


def make_denoise_instance(n=32, delta=0.1, seed=0, eta1=0.0, eta2=0.0, tv_weight=0.0, image=None):
    """Noisy synthetic image (uniform noise of half-width ``delta``)."""
    img = synthetic_image(n) if image is None else np.asarray(image, dtype=float)
    clean = img.reshape(-1, order="F")
    f = add_noise(clean, NoiseSpec(delta), seed)
    Dx, Dy, H = difference_operators(n)
    return DenoiseInstance(n, f, Dx, Dy, H, eta1, eta2, tv_weight, clean)


def psnr(u, ref, peak=1.0):
    mse = float(np.mean((np.asarray(u) - np.asarray(ref)) ** 2))
    return np.inf if mse == 0 else 10 * np.log10(peak**2 / mse)


# ---------------------------------------------------------------------------
# two-sided smoothing of |s|
# ---------------------------------------------------------------------------


def abs_eps(s, eps):
    """Smoothed ``|s|``: quadratic on ``[-eps, eps]``."""
    return phi_eps(np.abs(s), eps)


def abs_eps_prime(s, eps):
    s = np.asarray(s, dtype=float)
    return s / np.maximum(eps, np.abs(s))


def abs_weights(v, eps):
    """``1 / max(eps, |v_j|)``; every row counts (the penalty is two-sided)."""
    v = np.asarray(v, dtype=float)
    return DiagonalWeights(1.0 / np.maximum(eps, np.abs(v)), np.ones(v.shape, dtype=bool))


def _wgram(D, w):
    return (D.T @ sp.diags(w) @ D).tocsr()


# ---------------------------------------------------------------------------
# multi-parameter functional
# ---------------------------------------------------------------------------


def multiparam_energy(u, inst: DenoiseInstance, eps):
    r = u - inst.f
    val = 0.5 * float(r @ r)
    if inst.eta1:
        val += inst.eta1 * (float(np.sum(abs_eps(inst.Dx @ u, eps))) + float(np.sum(abs_eps(inst.Dy @ u, eps))))
    if inst.eta2:
        val += inst.eta2 * float(np.sum(abs_eps(inst.H @ u, eps)))
    return val


def multiparam_gradient(u, inst: DenoiseInstance, eps):
    grad = u - inst.f
    if inst.eta1:
        grad = grad + inst.eta1 * (inst.Dx.T @ abs_eps_prime(inst.Dx @ u, eps)
                                   + inst.Dy.T @ abs_eps_prime(inst.Dy @ u, eps))
    if inst.eta2:
        grad = grad + inst.eta2 * (inst.H.T @ abs_eps_prime(inst.H @ u, eps))
    return grad


def _solve(M, rhs, what):
    d, rep = spd_solve(M, rhs)
    if not rep.success:
        raise StepSolveError(f"{what} solve failed: {rep.message}", rep)
    return d


def denoise_step_multiparam(u_k, inst: DenoiseInstance, alpha, eps):
    """One reweighted step; returns ``u_{k+1}``."""
    if not alpha > 0 or not eps > 0:
        raise ValueError("alpha and eps must be positive")
    u_k = np.asarray(u_k, dtype=float)
    grad = multiparam_gradient(u_k, inst, eps)
    if not np.any(grad):
        return u_k.copy()
    M = alpha * sp.identity(u_k.size, format="csr")
    if inst.eta1:
        M = M + inst.eta1 * (_wgram(inst.Dx, abs_weights(inst.Dx @ u_k, eps).entries)
                             + _wgram(inst.Dy, abs_weights(inst.Dy @ u_k, eps).entries))
    if inst.eta2:
        M = M + inst.eta2 * _wgram(inst.H, abs_weights(inst.H @ u_k, eps).entries)
    return u_k + _solve(M.tocsr(), -grad, "denoising step")


# ---------------------------------------------------------------------------
# isotropic total variation
# ---------------------------------------------------------------------------


def _magnitude(u, Dx, Dy):
    gx = Dx @ u
    gy = Dy @ u
    return gx, gy, np.sqrt(gx * gx + gy * gy)


def tv_weights(u, Dx, Dy, eps) -> DiagonalWeights:
    """``1 / max(eps, r_i)`` from the joint gradient magnitude ``r``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    _, _, r = _magnitude(np.asarray(u, dtype=float), Dx, Dy)
    return DiagonalWeights(1.0 / np.maximum(eps, r), np.ones(r.shape, dtype=bool))


def tv_penalty(u, Dx, Dy, eps, cell_area=1.0):
    """``sum_i phi_eps(r_i) * cell_area``."""
    _, _, r = _magnitude(np.asarray(u, dtype=float), Dx, Dy)
    return float(np.sum(phi_eps(r, eps))) * cell_area


def tv_penalty_gradient(u, Dx, Dy, eps, cell_area=1.0):
    """``cell_area (D_x^T chi D_x u + D_y^T chi D_y u)`` with the TV weights."""
    gx, gy, r = _magnitude(np.asarray(u, dtype=float), Dx, Dy)
    chi = 1.0 / np.maximum(eps, r)
    return cell_area * (Dx.T @ (chi * gx) + Dy.T @ (chi * gy))


def tv_energy(u, inst: DenoiseInstance, eps):
    r = u - inst.f
    dA = inst.cell_area
    return 0.5 * dA * float(r @ r) + inst.tv_weight * tv_penalty(u, inst.Dx, inst.Dy, eps, dA)


def tv_gradient(u, inst: DenoiseInstance, eps):
    dA = inst.cell_area
    return dA * (u - inst.f) + inst.tv_weight * tv_penalty_gradient(u, inst.Dx, inst.Dy, eps, dA)


def denoise_step_tv(u_k, inst: DenoiseInstance, eps, alpha=1.0):
    """``(alpha dA I + w dA (D_x^T chi D_x + D_y^T chi D_y)) d = -J_eps'(u_k)``."""
    u_k = np.asarray(u_k, dtype=float)
    grad = tv_gradient(u_k, inst, eps)
    if not np.any(grad):
        return u_k.copy()
    chi = tv_weights(u_k, inst.Dx, inst.Dy, eps).entries
    dA = inst.cell_area
    M = alpha * dA * sp.identity(u_k.size, format="csr") + inst.tv_weight * dA * (
        _wgram(inst.Dx, chi) + _wgram(inst.Dy, chi))
    return u_k + _solve(M.tocsr(), -grad, "TV step")


def _iterate(u0, energy, gradient, step, tol, max_iter, slack=1e-12, step_tol=0.0):
    u = np.array(u0, dtype=float, copy=True)
    trace = IterateTrace()
    rep = SolveReport(x=u, converged=False, iterations=0, grad_inf=np.inf, trace=trace, reason="max_iter")
    J = energy(u)
    for k in range(max_iter + 1):
        g = gradient(u)
        gnorm = float(np.max(np.abs(g)))
        rec = TraceRecord(k, J, gnorm, u.size)
        rep.x, rep.iterations, rep.grad_inf = u, k, gnorm
        if gnorm < tol:
            trace.append(rec)
            rep.converged, rep.reason = True, "tolerance"
            break
        if k == max_iter:
            trace.append(rec)
            break
        try:
            u_new = step(u)
        except StepSolveError as exc:
            trace.append(rec)
            rep.reason, rep.message = "solver_failure", str(exc)
            break
        J_new = energy(u_new)
        rec.step_norm = float(np.linalg.norm(u_new - u))
        rec.alpha_k = 1.0
        trace.append(rec)
        if J_new > J + scaled_tol(J, slack):
            rep.nonmonotone_steps.append(k)
        u, J = u_new, J_new
        # stationarity in x: the gradient floor grows like 1/eps, the step does not
        if step_tol and rec.step_norm <= step_tol * max(1.0, float(np.linalg.norm(u))):
            g = gradient(u)
            trace.append(TraceRecord(k + 1, J, float(np.max(np.abs(g))), u.size))
            rep.x, rep.iterations, rep.grad_inf = u, k + 1, trace[-1].grad_inf
            rep.converged, rep.reason = True, "step"
            break
    return rep


def solve_denoise(inst: DenoiseInstance, eps, alpha=1.0, tol=1e-8, max_iter=200, method="multiparam",
                  u0=None, step_tol=0.0):
    """Run the reweighted iteration from ``u0`` (default: the noisy image).

    Stops when the gradient sup-norm drops below ``tol`` or, if ``step_tol``
    is positive, when ``||u_{k+1} - u_k|| <= step_tol max(1, ||u_{k+1}||)``.
    """
    u0 = inst.f if u0 is None else u0
    if method == "multiparam":
        return _iterate(u0, lambda u: multiparam_energy(u, inst, eps),
                        lambda u: multiparam_gradient(u, inst, eps),
                        lambda u: denoise_step_multiparam(u, inst, alpha, eps), tol, max_iter,
                        step_tol=step_tol)
    if method == "tv":
        return _iterate(u0, lambda u: tv_energy(u, inst, eps), lambda u: tv_gradient(u, inst, eps),
                        lambda u: denoise_step_tv(u, inst, eps, alpha), tol, max_iter, step_tol=step_tol)
    raise ValueError(f"unknown denoising method {method!r}")


# ---------------------------------------------------------------------------
# 1-D total variation
# ---------------------------------------------------------------------------


def _d1(n):
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")


def tv1d_energy(u, f, lam, eps):
    """``1/2 ||u - f||^2 + lam sum_i abs_eps(u_{i+1} - u_i)``."""
    u = np.asarray(u, dtype=float)
    r = u - f
    return 0.5 * float(r @ r) + lam * float(np.sum(abs_eps(np.diff(u), eps)))


def tv1d_gradient(u, f, lam, eps):
    u = np.asarray(u, dtype=float)
    return (u - f) + lam * (_d1(u.size).T @ abs_eps_prime(np.diff(u), eps))


def tv1d_step(u, f, lam, eps, alpha=1.0):
    """One reweighted step for the 1-D functional; returns the new iterate."""
    u = np.asarray(u, dtype=float)
    D = _d1(u.size)
    w = abs_weights(np.diff(u), eps).entries
    M = (alpha * sp.identity(u.size) + lam * (D.T @ sp.diags(w) @ D)).toarray()
    return u + _solve(M, -tv1d_gradient(u, f, lam, eps), "1-D TV step")


def solve_tv1d(f, lam, eps, u0=None, alpha=1.0, tol=1e-10, max_iter=200, step_tol=1e-12):
    """Reweighted iteration for 1-D TV denoising of ``f``.

    ``eps`` may be a decreasing sequence; each value warm-starts the next and
    the report of the last stage is returned.  Each stage stops on a small
    gradient or a small relative step (see :func:`solve_denoise`).
    """
    f = np.asarray(f, dtype=float)
    schedule = np.atleast_1d(np.asarray(eps, dtype=float))
    u = f.copy() if u0 is None else np.asarray(u0, dtype=float)
    rep = None
    for e in schedule:
        rep = _iterate(u, lambda v: tv1d_energy(v, f, lam, e), lambda v: tv1d_gradient(v, f, lam, e),
                       lambda v: tv1d_step(v, f, lam, e, alpha), tol, max_iter, step_tol=step_tol)
        u = rep.x
    return rep
