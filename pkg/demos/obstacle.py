"""Elastic membrane above nothing, pushed up to a pyramid-shaped ceiling.

min 1/2 U^T H U - F^T U  subject to  U <= distance to the boundary,
with bilinear elements on the unit square, load C = 10 and beta = 0.01.
Writes the solution grid and the iteration trace to ``demo_out/obstacle``.

Run:  python demos/obstacle.py [n]
"""
import sys
import time
from pathlib import Path

import numpy as np

from penalty_forge import SolverConfig, solve_algorithm1
from penalty_forge.io import write_grid_text, write_pgm, write_trace_csv
from penalty_forge.problems import GridSpec, assemble_obstacle


def main(n=50):
    grid = GridSpec(n)
    inst = assemble_obstacle(grid, C=10.0)
    eps = grid.h**2
    config = SolverConfig(alpha=1.0, epsilon=eps, tol=1e-10, max_iter=100)

    t0 = time.perf_counter()
    rep = solve_algorithm1(inst.initial_guess(), inst.problem(0.01), config)
    elapsed = time.perf_counter() - t0

    print(f"grid {n}x{n}, h = {grid.h}, eps = h^2 = {eps:g}")
    print(f"{'k':>3} {'J_eps':>16} {'|grad|_inf':>11} {'active':>7}")
    for rec in rep.trace:
        print(f"{rec.k:>3} {rec.J_eps:>16.10f} {rec.grad_inf:>11.2e} {rec.active_size:>7}")
    contact = np.sum(inst.g - rep.x <= eps)
    print(f"{rep.reason} after {rep.iterations} iterations in {elapsed:.2f}s")
    print(f"max(U - g) = {np.max(rep.x - inst.g):.2e}; {contact} of {grid.interior_count} nodes in contact")

    out = Path("demo_out/obstacle")
    out.mkdir(parents=True, exist_ok=True)
    U = grid.to_grid(rep.x)
    write_grid_text(out / "U.txt", U)
    write_pgm(out / "U.pgm", U)
    write_trace_csv(rep.trace, out / "trace.csv")
    print(f"wrote {out}/U.txt, U.pgm, trace.csv")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 50)
