import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from phasefield.linalg import SolverError, solve_spd


def _random_spd(rng, n):
    q = rng.standard_normal((n, n))
    return q @ q.T + n * np.eye(n)


@given(st.integers(0, 2**32 - 1))
def test_matches_dense_solve(seed):
    rng = np.random.default_rng(seed)
    A = _random_spd(rng, 10)
    b = rng.standard_normal(10)
    x = solve_spd(sp.csr_matrix(A), b, tol=1e-13)
    assert np.abs(x - np.linalg.solve(A, b)).max() <= 1e-8


def test_scaled_mass_matrix(small_ops):
    A = (3.0 * small_ops.mass_U).tocsr()
    b = np.random.default_rng(0).standard_normal(A.shape[0])
    x, (its, res) = solve_spd(A, b, tol=1e-10, return_info=True)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)
    assert res <= 1e-10 and its > 0


def test_zero_rhs_gives_exact_zero():
    A = sp.identity(5, format="csr") * 2.0
    x = solve_spd(A, np.zeros(5), x0=np.ones(5))
    assert np.all(x == 0.0)


def test_maxit_error_reports_history_and_residual(small_ops):
    A = (small_ops.mass_U + small_ops.stiff_U).tocsr()
    b = np.random.default_rng(1).standard_normal(A.shape[0])
    with pytest.raises(SolverError, match="history length 3, final relative residual") as info:
        solve_spd(A, b, tol=1e-14, maxit=2)
    assert info.value.iterations == 2 and info.value.residual > 1e-14


def test_non_positive_diagonal_rejected():
    A = sp.csr_matrix(np.diag([1.0, 0.0, 2.0]))
    with pytest.raises(SolverError, match="row 1"):
        solve_spd(A, np.ones(3))


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        solve_spd(sp.identity(3, format="csr"), np.ones(4))


def test_good_initial_guess_returns_immediately():
    A = sp.csr_matrix(np.diag([1.0, 2.0, 4.0]))
    b = np.array([1.0, 1.0, 1.0])
    x0 = np.array([1.0, 0.5, 0.25])
    x, (its, res) = solve_spd(A, b, x0=x0, return_info=True)
    assert its == 0 and np.array_equal(x, x0)
