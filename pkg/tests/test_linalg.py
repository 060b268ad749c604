import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from internodes.linalg import (KrylovReport, LocalSolver, NotSPDError, bicgstab, cholesky,
                               cholesky_solve, gmres)


def nonsymmetric_system(n=60, seed=0):
    rng = np.random.default_rng(seed)
    A = np.eye(n) * 4 + rng.normal(scale=0.3, size=(n, n))
    b = rng.normal(size=n)
    return A, b


def test_cholesky_solves_spd_systems():
    rng = np.random.default_rng(1)
    B = rng.normal(size=(8, 8))
    A = B @ B.T + 8 * np.eye(8)
    b = rng.normal(size=8)
    L = cholesky(A)
    np.testing.assert_allclose(L @ L.T, A, atol=1e-12)
    np.testing.assert_allclose(cholesky_solve(L, b), np.linalg.solve(A, b), atol=1e-12)


def test_cholesky_rejects_non_spd():
    with pytest.raises(NotSPDError):
        cholesky(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NotSPDError):
        cholesky(np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(ValueError):
        cholesky(np.ones((2, 3)))


@pytest.mark.parametrize("symmetric_input, kind", [(True, "cholesky"), (False, "lu")])
def test_local_solver(symmetric_input, kind):
    n = 40
    T = sp.diags([-1, 2.5, -1], [-1, 0, 1], shape=(n, n))
    A = T if symmetric_input else T + sp.diags([0.3], [2], shape=(n, n))
    solver = LocalSolver(A)
    assert solver.kind == kind
    b = np.arange(n, dtype=float)
    np.testing.assert_allclose(A @ solver.solve(b), b, atol=1e-10)
    B = np.column_stack([b, b[::-1]])
    np.testing.assert_allclose(A @ solver.solve(B), B, atol=1e-10)


def test_local_solver_falls_back_for_indefinite_matrices():
    A = sp.diags([1.0, -2.0, 3.0])
    solver = LocalSolver(A)
    assert solver.kind == "lu"
    np.testing.assert_allclose(solver.solve(np.ones(3)), [1.0, -0.5, 1 / 3])


def test_local_solver_empty():
    solver = LocalSolver(sp.csr_matrix((0, 0)))
    assert solver.kind == "empty" and solver.solve(np.zeros(0)).size == 0


@pytest.mark.parametrize("method", [bicgstab, gmres])
def test_krylov_solves_against_dense_oracle(method):
    A, b = nonsymmetric_system()
    x, rep = method(lambda v: A @ v, b, tol=1e-12, max_it=300)
    assert isinstance(rep, KrylovReport) and rep.converged and not rep.breakdown
    np.testing.assert_allclose(x, np.linalg.solve(A, b), atol=1e-9)
    assert np.linalg.norm(b - A @ x) <= 1e-12 * np.linalg.norm(b)
    assert rep.residual == pytest.approx(np.linalg.norm(b - A @ x) / np.linalg.norm(b))
    assert len(rep.history) >= 2 and rep.history[0] == pytest.approx(1.0)


@pytest.mark.parametrize("method", [bicgstab, gmres])
def test_right_preconditioning_with_the_exact_inverse(method):
    A, b = nonsymmetric_system(seed=4)
    Ainv = np.linalg.inv(A)
    x, rep = method(lambda v: A @ v, b, lambda v: Ainv @ v, tol=1e-10)
    assert rep.converged and rep.iterations <= 2
    np.testing.assert_allclose(x, np.linalg.solve(A, b), atol=1e-9)


@pytest.mark.parametrize("method", [bicgstab, gmres])
def test_zero_rhs(method):
    x, rep = method(lambda v: v, np.zeros(5))
    assert rep.converged and rep.iterations == 0 and np.all(x == 0)


@pytest.mark.parametrize("method", [bicgstab, gmres])
def test_iteration_cap_reports_non_convergence(method):
    A, b = nonsymmetric_system(n=80, seed=2)
    _, rep = method(lambda v: A @ v, b, tol=1e-14, max_it=3)
    assert not rep.converged and rep.iterations == 3


def test_gmres_restart_still_converges():
    A, b = nonsymmetric_system(n=50, seed=5)
    x, rep = gmres(lambda v: A @ v, b, tol=1e-10, max_it=400, restart=5)
    assert rep.converged
    np.testing.assert_allclose(A @ x, b, atol=1e-8)


def test_bicgstab_flags_breakdown():
    # rotation by 90 degrees: the shadow residual is orthogonal to A r
    A = np.array([[0.0, -1.0], [1.0, 0.0]])
    _, rep = bicgstab(lambda v: A @ v, np.array([1.0, 0.0]), max_it=10)
    assert rep.breakdown and not rep.converged


@given(st.integers(0, 10_000))
def test_krylov_runs_are_deterministic(seed):
    A, b = nonsymmetric_system(n=20, seed=seed)
    x1, r1 = bicgstab(lambda v: A @ v, b)
    x2, r2 = bicgstab(lambda v: A @ v, b)
    assert np.array_equal(x1, x2) and r1 == r2
