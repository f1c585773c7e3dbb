"""Reference solvers that share no code path with the iterative methods.

* :func:`enumerate_qp` solves a small strictly convex QP by trying every
  candidate active set and keeping the KKT point.
* :func:`taut_string_tv1d` solves 1-D total-variation denoising exactly with
  the taut-string algorithm.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

__all__ = ["QPSolution", "enumerate_qp", "taut_string_tv1d"]


@dataclass
class QPSolution:
    x: np.ndarray
    mu: np.ndarray
    active: tuple
    value: float


def enumerate_qp(A, b, G, g, feas_tol=1e-10, dual_tol=1e-10):
    """Minimize ``1/2 x^T A x - b^T x`` s.t. ``G x <= g`` by active-set enumeration.

    Every subset ``S`` of rows with full row rank is tried; the equality
    constrained KKT system on ``S`` is solved densely and the candidate is
    kept if it is primal feasible and has nonnegative multipliers.  Cost is
    ``2^m`` dense solves, so only use it for ``m`` up to about 12.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    G = np.asarray(G, dtype=float)
    g = np.asarray(g, dtype=float)
    n, m = b.size, g.size
    best = None
    for size in range(0, min(m, n) + 1):
        for S in combinations(range(m), size):
            S = list(S)
            Gs = G[S]
            if size and np.linalg.matrix_rank(Gs) < size:
                continue
            K = np.block([[A, Gs.T], [Gs, np.zeros((size, size))]])
            try:
                sol = np.linalg.solve(K, np.concatenate([b, g[S]]))
            except np.linalg.LinAlgError:
                continue
            x, mu_s = sol[:n], sol[n:]
            scale = max(1.0, np.abs(g).max(initial=0.0))
            if np.any(G @ x - g > feas_tol * scale) or np.any(mu_s < -dual_tol * max(1.0, np.abs(mu_s).max(initial=0.0))):
                continue
            val = 0.5 * x @ A @ x - b @ x
            if best is None or val < best.value - 1e-14 * max(1.0, abs(val)):
                mu = np.zeros(m)
                mu[S] = np.maximum(mu_s, 0.0)
                best = QPSolution(x, mu, tuple(S), float(val))
    if best is None:
        raise ValueError("no KKT point found; the QP may be infeasible")
    return best


def taut_string_tv1d(y, lam):
    """Exact minimizer of ``1/2 ||u - y||^2 + lam * sum_i |u_{i+1} - u_i|``.

    The solution is the derivative of the shortest path (taut string)
    through the tube of half-width ``lam`` around the cumulative sums of
    ``y``, pinned at both ends.  The path is computed segment by segment:
    from the current knot, the tightest feasible upper and lower slopes are
    tracked until they cross, at which point the string touches a tube
    boundary and a new knot is placed there.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if n == 0:
        return y.copy()
    # tube around the cumulative sum, endpoints pinned
    S = np.concatenate([[0.0], np.cumsum(y)])
    lo = S - lam
    hi = S + lam
    lo[0] = hi[0] = 0.0
    lo[-1] = hi[-1] = S[-1]

    u = np.empty(n)
    k0, z0 = 0, 0.0  # current knot (index, height)
    while k0 < n:
        # candidate slopes: the string must stay in [lo, hi] at every node
        smin, smax = -np.inf, np.inf
        kmin = kmax = k0
        j = k0 + 1
        knot = None
        while j <= n:
            s_hi = (hi[j] - z0) / (j - k0)
            s_lo = (lo[j] - z0) / (j - k0)
            if s_lo > smax:
                # string must bend up at the node that fixed smax (upper boundary)
                knot = (kmax, z0 + smax * (kmax - k0))
                break
            if s_hi < smin:
                knot = (kmin, z0 + smin * (kmin - k0))
                break
            if s_hi <= smax:
                smax, kmax = s_hi, j
            if s_lo >= smin:
                smin, kmin = s_lo, j
            j += 1
        if knot is None:
            # reached the end: the final node is pinned, slope to it
            slope = (S[-1] - z0) / (n - k0)
            u[k0:n] = slope
            break
        k1, z1 = knot
        u[k0:k1] = (z1 - z0) / (k1 - k0)
        k0, z0 = k1, z1
    return u
