import numpy as np
import pytest
import scipy.sparse.linalg as spla

from penalty_forge import SolverConfig, solve_algorithm1
from penalty_forge.linalg import as_dense, is_symmetric
from penalty_forge.oracles import taut_string_tv1d
from penalty_forge.penalty import DiagonalWeights
from penalty_forge.problems import (
    GridSpec,
    NoiseSpec,
    add_noise,
    assemble_fd_laplacian,
    assemble_inverse_medium,
    assemble_inverse_source,
    assemble_obstacle,
    denoise_step_multiparam,
    difference_operators,
    distance_to_boundary,
    fd_laplacian_min_eigenvalue,
    make_denoise_instance,
    multiparam_energy,
    multiparam_gradient,
    q1_element_stiffness,
    solve_denoise,
    solve_tv1d,
    square_indicator,
    tv1d_step,
    tv_penalty,
    tv_penalty_gradient,
    tv_weights,
)


# -- grid ----------------------------------------------------------------------


def test_distance_to_boundary():
    assert distance_to_boundary(0.5, 0.5) == 0.5
    assert distance_to_boundary(0.25, 0.5) == 0.25
    for p in [(0, 0.3), (1, 0.7), (0.2, 0), (0.9, 1)]:
        assert distance_to_boundary(*p) == 0.0
    with pytest.raises(ValueError):
        distance_to_boundary(1.2, 0.5)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(1)
    with pytest.raises(ValueError):
        assemble_obstacle(GridSpec(2))


def test_q1_element_matrix():
    Ke = q1_element_stiffness()
    assert np.allclose(Ke.sum(axis=1), 0)
    assert np.allclose(Ke, Ke.T)
    assert np.linalg.matrix_rank(Ke) == 3


def test_obstacle_assembly():
    grid = GridSpec(10)
    inst = assemble_obstacle(grid)
    H = inst.H
    assert is_symmetric(H)
    assert np.allclose(H.diagonal(), 8 / 3)
    assert np.linalg.eigvalsh(H.toarray()).min() > 0
    assert np.allclose(inst.F, 10 * grid.h**2)
    assert np.all(inst.g > 0) and inst.g.max() == pytest.approx(0.5)
    # rows of nodes away from the boundary annihilate linear functions
    X, Y = grid.interior_coordinates()
    v = H @ (2 * X + 3 * Y + 1)
    G = grid.to_grid(v)
    assert np.allclose(G[1:-1, 1:-1], 0, atol=1e-12)
    prob = inst.problem(0.01)
    assert prob.m == grid.interior_count
    assert assemble_obstacle(grid, bilateral=True).problem().m == 2 * grid.interior_count


def test_obstacle_dihedral_symmetry():
    # nodal multipliers are about C h^2 = 0.025 here, so beta = 0.05 makes the penalty exact
    grid = GridSpec(20)
    inst = assemble_obstacle(grid)
    rep = solve_algorithm1(inst.initial_guess(), inst.problem(0.05),
                           SolverConfig(epsilon=grid.h**2, tol=1e-10, max_iter=50))
    assert rep.converged
    U = grid.to_grid(rep.x)
    for T in (U.T, U[::-1], U[:, ::-1], np.rot90(U), np.rot90(U, 2), np.rot90(U, 3), U[::-1].T):
        assert np.max(np.abs(T - U)) < 1e-10


def test_fd_laplacian():
    grid = GridSpec(8)
    K = assemble_fd_laplacian(grid)
    h = grid.h
    row = K.toarray()[grid.to_grid(np.arange(grid.interior_count))[3, 3]]
    assert row.max() == pytest.approx(4 / h**2)
    assert np.sum(np.isclose(row, -1 / h**2)) == 4
    assert is_symmetric(K)
    lam = np.linalg.eigvalsh(K.toarray())
    assert lam.min() == pytest.approx(fd_laplacian_min_eigenvalue(grid), rel=1e-12)
    X, Y = grid.interior_coordinates()
    v = np.sin(np.pi * X) * np.sin(np.pi * Y)
    assert np.allclose(K @ v, fd_laplacian_min_eigenvalue(grid) * v)
    fine = GridSpec(32)
    Xf, Yf = fine.interior_coordinates()
    vf = np.sin(np.pi * Xf) * np.sin(np.pi * Yf)
    err = np.linalg.norm(assemble_fd_laplacian(fine) @ vf - 2 * np.pi**2 * vf) / np.linalg.norm(2 * np.pi**2 * vf)
    assert err < 2 * (np.pi * fine.h) ** 2 / 12 * 1.1


# -- noise ---------------------------------------------------------------------


def test_noise():
    y = np.linspace(0, 1, 50)
    assert np.array_equal(add_noise(y, NoiseSpec(0.0), 3), y)
    a = add_noise(y, NoiseSpec(0.1), 7)
    assert np.array_equal(a, add_noise(y, NoiseSpec(0.1), 7))
    assert not np.array_equal(a, add_noise(y, NoiseSpec(0.1), 8))
    c = add_noise(np.full(10000, 2.0), NoiseSpec(0.05, "relative-max"), 1)
    assert c.min() >= 2.0 - 0.1 and c.max() <= 2.0 + 0.1
    with pytest.raises(ValueError):
        NoiseSpec(-1.0)
    with pytest.raises(ValueError):
        NoiseSpec(0.1, "gaussian")


# -- inverse source ------------------------------------------------------------


def test_inverse_source_zero_truth():
    grid = GridSpec(10)
    inst = assemble_inverse_source(grid, 1e-4, u_star=np.zeros(grid.interior_count))
    assert not np.any(inst.y_delta)
    rep = solve_algorithm1(np.zeros(grid.interior_count), inst.problem(1.0),
                           SolverConfig(epsilon=grid.h**2))
    assert rep.converged and np.max(np.abs(rep.x)) < 1e-12
    assert inst.problem().m == 2 * grid.interior_count


def test_inverse_source_gradient_fd():
    grid = GridSpec(8)
    inst = assemble_inverse_source(grid, 1e-3, NoiseSpec(0.01), seed=0)
    rng = np.random.default_rng(0)
    u = rng.uniform(0, 1, grid.interior_count)
    g = inst.gradient(u)
    h = 1e-3
    for i in rng.choice(grid.interior_count, 10, replace=False):
        e = np.zeros_like(u)
        e[i] = h
        fd = (inst.value(u + e) - inst.value(u - e)) / (2 * h)
        assert fd == pytest.approx(g[i], rel=1e-6, abs=1e-12)


def test_inverse_source_step_solver_matches_dense():
    grid = GridSpec(6)
    inst = assemble_inverse_source(grid, 1e-2)
    N = grid.interior_count
    prob = inst.problem(2.0)
    rng = np.random.default_rng(1)
    chi = np.where(rng.uniform(size=2 * N) < 0.3, rng.uniform(1, 5, 2 * N), 0.0)
    w = DiagonalWeights(chi, chi > 0)
    rhs = rng.standard_normal(N)
    d = inst.step_solver(None, w, 1.0, 2.0, rhs, G=prob.constraints.G)
    Kinv = np.linalg.inv(inst.K.toarray())
    G = as_dense(prob.constraints.G)
    M = Kinv @ Kinv + inst.eta * np.eye(N) + 2.0 * G.T @ np.diag(chi) @ G
    assert np.allclose(d, np.linalg.solve(M, rhs), atol=1e-10 * np.abs(d).max())
    H = inst.hessian()
    assert isinstance(H, spla.LinearOperator)
    v = rng.standard_normal(N)
    assert np.allclose(H @ v, (Kinv @ Kinv + inst.eta * np.eye(N)) @ v)


def test_inverse_source_error_decreases_with_eta():
    grid = GridSpec(20)
    errs = []
    for eta in (1e-2, 1e-4, 1e-6):
        inst = assemble_inverse_source(grid, eta)
        rep = solve_algorithm1(np.zeros(grid.interior_count), inst.problem(1.0),
                               SolverConfig(epsilon=grid.h**2, tol=1e-10, max_iter=60))
        assert rep.converged
        errs.append(np.linalg.norm(rep.x - inst.u_star) * grid.h)
    assert errs[0] > errs[1] > errs[2]


# -- inverse medium ------------------------------------------------------------


def test_inverse_medium_reduces_to_laplacian():
    grid = GridSpec(10)
    N = grid.interior_count
    inst = assemble_inverse_medium(grid, 1e-3, u_star=np.zeros(N), noise=NoiseSpec(0.0))
    y = spla.spsolve(assemble_fd_laplacian(grid).tocsc(), np.full(N, 10.0))
    assert np.allclose(inst.state(np.zeros(N)), y)


def test_inverse_medium_gradient_fd():
    grid = GridSpec(8)
    inst = assemble_inverse_medium(grid, 1e-3, seed=2, noise=NoiseSpec(0.01, "relative-max"))
    rng = np.random.default_rng(3)
    u = rng.uniform(0, 2, grid.interior_count)
    g = inst.gradient(u)
    h = 1e-4
    for i in rng.choice(grid.interior_count, 10, replace=False):
        e = np.zeros_like(u)
        e[i] = h
        fd = (inst.value(u + e) - inst.value(u - e)) / (2 * h)
        assert fd == pytest.approx(g[i], rel=1e-6, abs=1e-12)


def test_inverse_medium_validation_and_preconditioner():
    grid = GridSpec(6)
    N = grid.interior_count
    inst = assemble_inverse_medium(grid, 1e-2)
    with pytest.raises(ValueError):
        inst.state(np.full(N, -2 * fd_laplacian_min_eigenvalue(grid)))
    with pytest.raises(ValueError):
        assemble_inverse_medium(grid, 1e-2, U=0.5)
    P = inst.preconditioner()
    assert np.allclose(P.toarray(), (0.01 + 1e-2) * np.eye(N))


def test_square_indicator():
    grid = GridSpec(10)
    u = square_indicator(grid)
    X, Y = grid.interior_coordinates()
    assert set(np.unique(u)) == {0.0, 1.0}
    assert np.all(u[(np.abs(X - 0.5) < 0.15) & (np.abs(Y - 0.5) < 0.15)] == 1.0)


# -- denoising -----------------------------------------------------------------


def test_difference_operators_annihilate_constants():
    Dx, Dy, H = difference_operators(6)
    c = np.full(36, 3.0)
    assert not np.any(Dx @ c) and not np.any(Dy @ c) and np.allclose(H @ c, 0)
    assert Dx.shape == Dy.shape
    assert is_symmetric(H)


def test_denoise_step_trivial_cases():
    inst = make_denoise_instance(8, 0.1, 0)
    u = denoise_step_multiparam(inst.f, inst, 1.0, 1e-3)
    assert np.array_equal(u, inst.f)
    flat = make_denoise_instance(8, 0.0, 0, eta1=0.1, eta2=0.01, image=np.full((8, 8), 0.7))
    assert np.allclose(denoise_step_multiparam(flat.f, flat, 1.0, 1e-3), flat.f)
    with pytest.raises(ValueError):
        denoise_step_multiparam(inst.f, inst, 0.0, 1e-3)


def test_tv_weights():
    Dx, Dy, _ = difference_operators(4)
    w = tv_weights(np.ones(16), Dx, Dy, 0.01)
    assert np.allclose(w.entries, 100.0)
    u = np.zeros(16)
    u[1] = 0.25  # one forward difference of size 1 (h = 1/4) at pixel 0 in x
    w = tv_weights(u, Dx, Dy, 1e-6)
    r0 = np.hypot((Dx @ u)[0], (Dy @ u)[0])
    assert r0 == pytest.approx(1.0) and w.entries[0] == pytest.approx(1.0)


def test_tv_gradient_fd():
    n = 8
    Dx, Dy, _ = difference_operators(n)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(n * n)
    eps, dA = 1e-3, 1 / n**2
    g = tv_penalty_gradient(u, Dx, Dy, eps, dA)
    h = 1e-6
    fd = np.array([(tv_penalty(u + h * e, Dx, Dy, eps, dA) - tv_penalty(u - h * e, Dx, Dy, eps, dA)) / (2 * h)
                   for e in np.eye(n * n)])
    assert np.linalg.norm(fd - g) / np.linalg.norm(g) < 1e-5


@pytest.mark.parametrize("method", ["multiparam", "tv"])
def test_denoise_monotone(method):
    inst = make_denoise_instance(16, 0.1, 3, eta1=0.05 / 16, eta2=1e-4 / 16**2, tv_weight=1e-3)
    rep = solve_denoise(inst, 1e-3, max_iter=40, method=method)
    J = rep.trace.column("J_eps")
    assert np.all(np.diff(J) <= 1e-12 * np.maximum(1.0, np.abs(J[:-1])))
    assert rep.nonmonotone_steps == []


def test_tv1d_single_jump_shrinks():
    y = np.repeat([0.0, 1.0], 8)
    u = y.copy()
    jumps = [1.0]
    for _ in range(10):
        u = tv1d_step(u, y, 0.2, 1e-4)
        jumps.append(u[8] - u[7])
    assert np.all(np.diff(jumps) <= 1e-15)
    ref = taut_string_tv1d(y, 0.2)
    rep = solve_tv1d(y, 0.2, [1e-2, 1e-4, 1e-6, 1e-8], max_iter=500)
    assert rep.converged
    assert np.max(np.abs(rep.x - ref)) < 1e-6


def test_energy_gradient_consistent():
    inst = make_denoise_instance(6, 0.1, 0, eta1=0.01, eta2=1e-4)
    rng = np.random.default_rng(4)
    u = inst.f + 0.05 * rng.standard_normal(36)
    g = multiparam_gradient(u, inst, 1e-3)
    h = 1e-7
    fd = np.array([(multiparam_energy(u + h * e, inst, 1e-3) - multiparam_energy(u - h * e, inst, 1e-3)) / (2 * h)
                   for e in np.eye(36)])
    assert np.linalg.norm(fd - g) / np.linalg.norm(g) < 1e-5
