import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from penalty_forge.linalg import (
    SingularSystemError,
    assemble_step_matrix,
    check_adjoint,
    finalize_triplets,
    is_symmetric,
    read_matrix_market,
    saddle_solve,
    spd_solve,
    write_matrix_market,
)
from penalty_forge.penalty import DiagonalWeights


def weights(entries):
    e = np.asarray(entries, dtype=float)
    return DiagonalWeights(e, e > 0)


def random_spd(rng, n):
    B = rng.standard_normal((n, n))
    return B.T @ B + np.eye(n)


@pytest.mark.parametrize("sparse", [False, True])
def test_step_matrix_hand_example(sparse):
    P = sp.identity(2, format="csr") if sparse else np.eye(2)
    M = assemble_step_matrix(1.0, P, 2.0, np.eye(2), weights([10.0, 0.0]))
    M = M.toarray() if sparse else M
    assert np.array_equal(M, np.diag([21.0, 1.0]))


def test_step_matrix_inactive_and_with_A():
    P = np.diag([2.0, 3.0])
    A = np.array([[1.0, 0.5], [0.5, 1.0]])
    G = np.array([[1.0, -1.0]])
    assert np.array_equal(assemble_step_matrix(0.5, P, 3.0, G, weights([0.0])), 0.5 * P)
    assert np.array_equal(assemble_step_matrix(0.5, P, 3.0, G, weights([0.0]), A=A), 0.5 * P + A)


def test_step_matrix_scalar_denominator():
    # 1 + beta / max(eps, x - g) with x - g = 1
    M = assemble_step_matrix(1.0, np.eye(1), 2.0, np.eye(1), weights([1.0]))
    assert M[0, 0] == 3.0
    M = assemble_step_matrix(1.0, np.eye(1), 2.0, np.eye(1), weights([10.0]))
    assert M[0, 0] == 21.0


def test_step_matrix_errors():
    with pytest.raises(ValueError):
        assemble_step_matrix(0.0, np.eye(2), 1.0, np.eye(2), weights([1, 1]))
    with pytest.raises(ValueError):
        assemble_step_matrix(1.0, np.eye(3), 1.0, np.eye(2), weights([1, 1]))
    with pytest.raises(ValueError):
        assemble_step_matrix(1.0, np.zeros((2, 2)), 1.0, np.eye(2), weights([0, 0]))


def test_step_matrix_symmetric_and_eigen_bound():
    rng = np.random.default_rng(0)
    for _ in range(30):
        n, m = rng.integers(1, 12, size=2)
        P = random_spd(rng, n)
        G = rng.standard_normal((m, n))
        chi = weights(rng.uniform(0, 5, m) * (rng.uniform(size=m) < 0.6))
        alpha = rng.uniform(0.1, 2)
        M = assemble_step_matrix(alpha, P, rng.uniform(0.1, 10), G, chi)
        assert is_symmetric(M, rtol=1e-13)
        lam = np.linalg.eigvalsh(M).min()
        assert lam >= alpha * np.linalg.eigvalsh(P).min() * (1 - 1e-10)
        Ms = assemble_step_matrix(alpha, sp.csr_matrix(P), 1.0, sp.csr_matrix(G), chi)
        assert sp.issparse(Ms) and is_symmetric(Ms, rtol=1e-13)


def test_finalize_triplets_sums_duplicates():
    M = finalize_triplets([0, 0, 1, 1], [0, 0, 1, 0], [1.0, 2.0, 5.0, -1.0], (2, 2))
    assert M.nnz == 3
    assert np.array_equal(M.toarray(), [[3.0, 0.0], [-1.0, 5.0]])
    coo = M.tocoo()
    assert len(set(zip(coo.row, coo.col))) == coo.nnz


def test_spd_solve_examples():
    x, rep = spd_solve(np.diag([21.0, 1.0]), np.array([21.0, 2.0]))
    assert rep.success and np.array_equal(x, [1.0, 2.0])
    r = np.array([0.3, -1.7, 2.0])
    x, rep = spd_solve(sp.identity(3, format="csr"), r)
    assert rep.success and np.allclose(x, r, rtol=0, atol=1e-15)


@pytest.mark.parametrize("kind", ["dense", "sparse", "pcg"])
def test_spd_solve_random(kind):
    rng = np.random.default_rng(4)
    A = random_spd(rng, 50)
    r = rng.standard_normal(50)
    ref = np.linalg.solve(A, r)
    if kind == "dense":
        x, rep = spd_solve(A, r)
    elif kind == "sparse":
        x, rep = spd_solve(sp.csr_matrix(A), r)
    else:
        x, rep = spd_solve(sp.csr_matrix(A), r, direct_threshold=10)
        assert rep.method == "pcg"
    assert rep.success
    assert np.max(np.abs(x - ref)) <= 1e-10 * max(1.0, np.max(np.abs(ref)))


def test_spd_solve_linear_operator():
    rng = np.random.default_rng(5)
    A = random_spd(rng, 30)
    op = spla.aslinearoperator(A)
    r = rng.standard_normal(30)
    x, rep = spd_solve(op, r)
    assert rep.method == "pcg" and rep.success
    assert np.allclose(x, np.linalg.solve(A, r), atol=1e-9)


def test_spd_solve_warm_start_is_idempotent():
    rng = np.random.default_rng(6)
    A = sp.csr_matrix(random_spd(rng, 40))
    r = rng.standard_normal(40)
    x, _ = spd_solve(A, r)
    x2, rep = spd_solve(A, r, x0=x)
    assert rep.success
    assert np.max(np.abs(x2 - x)) <= 1e-12 * max(1.0, np.max(np.abs(x)))


@pytest.mark.parametrize("sparse", [False, True])
def test_spd_solve_rejects_indefinite(sparse):
    M = np.diag([1.0, -2.0, 3.0])
    M = sp.csr_matrix(M) if sparse else M
    _, rep = spd_solve(M, np.ones(3))
    assert not rep.success
    assert rep.message


def test_spd_solve_shape_mismatch():
    with pytest.raises(ValueError):
        spd_solve(np.eye(3), np.ones(2))


def test_saddle_examples():
    x, mu = saddle_solve(np.eye(1), np.zeros((0, 1)), np.array([0.7]), np.array([]))
    assert x[0] == 0.7 and mu.size == 0
    x, mu = saddle_solve(np.eye(1), np.eye(1), np.zeros(1), np.array([-1.0]))
    assert x[0] == pytest.approx(-1.0, abs=1e-15) and mu[0] == pytest.approx(1.0, abs=1e-15)
    x, mu = saddle_solve(np.eye(1), np.eye(1), np.zeros(1), np.array([-1.0]), reg=1e-8)
    assert abs(x[0] + 1) < 1e-6 and abs(mu[0] - 1) < 1e-6


def test_saddle_sparse_matches_dense():
    rng = np.random.default_rng(7)
    A = random_spd(rng, 8)
    G = rng.standard_normal((3, 8))
    b = rng.standard_normal(8)
    g = rng.standard_normal(3)
    xd, md = saddle_solve(A, G, b, g)
    xs, ms = saddle_solve(sp.csr_matrix(A), sp.csr_matrix(G), b, g)
    assert np.allclose(xd, xs, atol=1e-12) and np.allclose(md, ms, atol=1e-12)
    assert np.allclose(A @ xd + G.T @ md, b, atol=1e-12)
    assert np.allclose(G @ xd, g, atol=1e-12)


@pytest.mark.parametrize("sparse", [False, True])
def test_saddle_singular_constraint_block(sparse):
    G = np.array([[1.0, 0.0], [1.0, 0.0]])
    A = np.eye(2)
    if sparse:
        G, A = sp.csr_matrix(G), sp.csr_matrix(A)
    with pytest.raises(SingularSystemError) as info:
        saddle_solve(A, G, np.zeros(2), np.zeros(2))
    assert info.value.block == "constraint"
    x, mu = saddle_solve(A, G, np.zeros(2), np.zeros(2), reg=1e-10)
    assert np.all(np.isfinite(x))


def test_saddle_singular_hessian_block():
    A = np.diag([1.0, 0.0, 0.0])
    G = np.array([[0.0, 1.0, 0.0]])
    with pytest.raises(SingularSystemError) as info:
        saddle_solve(A, G, np.ones(3), np.zeros(1))
    assert info.value.block == "hessian"


def test_check_adjoint():
    rng = np.random.default_rng(8)
    B = sp.random(20, 15, density=0.3, random_state=1, format="csr")
    assert check_adjoint(B, rng=rng) < 1e-12


def test_matrix_market_round_trip(tmp_path):
    M = sp.random(12, 9, density=0.4, random_state=2, format="csr")
    M.data = M.data * np.pi
    write_matrix_market(tmp_path / "M.mtx", M)
    back = read_matrix_market(tmp_path / "M.mtx")
    assert (back != M).nnz == 0
    v = np.random.default_rng(0).standard_normal(7) / 3
    write_matrix_market(tmp_path / "v.mtx", v)
    assert np.array_equal(read_matrix_market(tmp_path / "v.mtx"), v)
