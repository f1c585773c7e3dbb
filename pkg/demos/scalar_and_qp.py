"""Small problems where every number can be checked by hand.

1. The scalar problem  min 1/2 x^2  s.t.  x <= g  with g = -1, beta = 2.
   Algorithm 1 reaches the fixed point g + (-g) eps / (eps + beta) in five
   steps from x0 = -1.2; shrinking eps moves it toward the true solution -1.
2. A random box-constrained QP solved three ways (Algorithm 1, semismooth
   Newton, PDAS) and compared with brute-force active-set enumeration.

Run:  python demos/scalar_and_qp.py
"""
import numpy as np

from penalty_forge import SolverConfig, solve_algorithm1, solve_newton, solve_pdas
from penalty_forge.oracles import enumerate_qp
from penalty_forge.problems import random_box_qp, scalar_problem
from penalty_forge.solvers import LineSearchControl, consistency_sweep, penalty_multiplier


def scalar_demo():
    prob = scalar_problem(g=-1.0, beta=2.0)
    rep = solve_algorithm1(np.array([-1.2]), prob, SolverConfig(epsilon=0.1, tol=1e-12), keep_iterates=True)
    print("scalar problem, eps = 0.1")
    print(f"{'k':>3} {'x_k':>20} {'J_eps':>12} {'active':>6}")
    for x, rec in zip(rep.iterates, rep.trace):
        print(f"{rec.k:>3} {x[0]:>20.16f} {rec.J_eps:>12.6f} {rec.active_size:>6}")
    # the first step raises J_eps: x0 sits in the linear branch of phi_eps
    print("steps that increased J_eps:", rep.nonmonotone_steps)

    print("\nconsistency in eps (exact solution -1)")
    pts = consistency_sweep(prob, [1e-1, 1e-2, 1e-3, 1e-4], SolverConfig(tol=1e-12), x0=np.array([-1.2]))
    for p in pts:
        print(f"  eps={p.eps:<7g} x={p.x[0]:.12f}  |x + 1|={abs(p.x[0] + 1):.2e}  J={p.J:.10f}")


def qp_demo(seed=3, n=8, m=5):
    prob = random_box_qp(seed, n, m, beta=50.0)
    A, b, G, g = prob.objective.A, prob.objective.b, prob.constraints.G, prob.constraints.g
    ref = enumerate_qp(A, b, G, g)
    print(f"\nbox QP n={n}, m={m}; active constraints at the solution: {ref.active}")
    print(f"largest multiplier {ref.mu.max():.3f} (beta = {prob.beta} makes the penalty exact)")

    eps = 1e-8
    # below ~1e-16 beta / eps the gradient is roundoff, so tol stays above it
    config = SolverConfig(epsilon=eps, tol=1e-4, max_iter=500)
    runs = {
        "algorithm 1": solve_algorithm1(np.zeros(n), prob, config),
        "newton (damped)": solve_newton(np.zeros(n), prob, config, line_search=LineSearchControl()),
        "pdas": solve_pdas(np.zeros(n), None, prob),
    }
    for name, rep in runs.items():
        err = np.max(np.abs(rep.x - ref.x))
        print(f"  {name:<16} iterations {rep.iterations:>3}  |x - x*|_inf = {err:.2e}  ({rep.reason})")
    mu = penalty_multiplier(runs["algorithm 1"].x, prob, eps)
    print(f"  penalty multiplier error |mu - mu*|_inf = {np.max(np.abs(mu - ref.mu)):.2e}")


if __name__ == "__main__":
    scalar_demo()
    qp_demo()
