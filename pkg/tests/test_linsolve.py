import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from netform.linsolve import IncompatibleRhs, NoConvergence, SparseSymSystem, solve_zero_mean


def _random_laplacian(rng, n, density=0.4, shift=0.05):
    """Weighted Laplacian of a connected random graph (path plus extra edges)."""
    W = np.zeros((n, n))
    for i in range(n - 1):
        W[i, i + 1] = rng.uniform(shift, 2)
    extra = rng.random((n, n)) < density
    W += np.triu(extra * rng.uniform(0, 2, (n, n)), 2)
    W = W + W.T
    return np.diag(W.sum(axis=1)) - W


def _zero_sum(rng, n):
    b = rng.normal(size=n)
    return b - b.mean()


def test_zero_rhs():
    A = sp.csr_matrix(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    rep = solve_zero_mean(SparseSymSystem(A, np.zeros(2)))
    assert rep.iterations == 0 and np.all(rep.solution == 0)


def test_hand_solved_1d_system():
    # N=2, r=1, C=0: coefficients (r+C)/h = 2, rhs h*(1, 0, -1)
    A = sp.csr_matrix(np.array([[2.0, -2, 0], [-2, 4, -2], [0, -2, 2]]))
    rep = solve_zero_mean(SparseSymSystem(A, 0.5 * np.array([1.0, 0, -1])))
    assert np.allclose(rep.solution, [0.25, 0, -0.25], atol=1e-12)


def test_incompatible_rhs():
    A = sp.csr_matrix(np.array([[2.0, -2, 0], [-2, 4, -2], [0, -2, 2]]))
    with pytest.raises(IncompatibleRhs):
        solve_zero_mean(SparseSymSystem(A, np.array([1.0, 0, 0])))


@pytest.mark.parametrize("n", [3, 10, 25, 50])
@pytest.mark.parametrize("jacobi", [False, True])
def test_matches_pseudoinverse(rng, n, jacobi):
    for _ in range(5):
        L = _random_laplacian(rng, n)
        b = _zero_sum(rng, n)
        rep = solve_zero_mean(SparseSymSystem(sp.csr_matrix(L), b), rel_tol=1e-12, jacobi=jacobi)
        ref = np.linalg.pinv(L) @ b
        assert np.linalg.norm(rep.solution - ref) <= 1e-8 * np.linalg.norm(ref)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 40), seed=st.integers(0, 2 ** 32 - 1), tol=st.sampled_from([1e-6, 1e-10]))
def test_residual_and_mean_contract(n, seed, tol):
    rng = np.random.Generator(np.random.Philox(seed))
    L = _random_laplacian(rng, n)
    b = _zero_sum(rng, n)
    rep = solve_zero_mean(SparseSymSystem(sp.csr_matrix(L), b), rel_tol=tol)
    x = rep.solution
    assert np.linalg.norm(L @ x - b) <= tol * np.linalg.norm(b) * (1 + 1e-6)
    assert abs(x.mean()) <= 1e-14 * max(np.abs(x).max(), 1e-300)


def test_warm_start_reuses_solution(rng):
    L = sp.csr_matrix(_random_laplacian(rng, 30))
    b = _zero_sum(rng, 30)
    x = solve_zero_mean(SparseSymSystem(L, b), rel_tol=1e-12).solution
    rep = solve_zero_mean(SparseSymSystem(L, b), rel_tol=1e-10, x0=x + 3.0)
    assert rep.iterations == 0
    with pytest.raises(ValueError):
        solve_zero_mean(SparseSymSystem(L, b), x0=np.zeros(3))


def test_no_convergence_reports_condition(rng):
    L = sp.csr_matrix(_random_laplacian(rng, 40, shift=1e-6))
    b = _zero_sum(rng, 40)
    with pytest.raises(NoConvergence) as info:
        solve_zero_mean(SparseSymSystem(L, b), rel_tol=1e-14, max_iter=2)
    assert info.value.report.iterations == 2
    assert info.value.condition_estimate >= 1.0


def test_round_off_floor_stops_early(rng):
    L = sp.csr_matrix(_random_laplacian(rng, 200))
    b = _zero_sum(rng, 200)
    with pytest.raises(NoConvergence) as info:
        solve_zero_mean(SparseSymSystem(L, b), rel_tol=1e-18)
    assert info.value.report.iterations < 20 * 200
    assert np.isfinite(info.value.condition_estimate)
