import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from stochhom.eigen import eigenvalues_in_interval, residual_norms, smallest_eigenpairs
from stochhom.errors import ContractError
from stochhom.grid_fem import Grid, assemble_eps_problem, assemble_laplace
from stochhom.linalg import inertia_below, pcg

S = (0.0, 1.0, 0.0, 1.0)


def random_pencil(n, seed):
    rng = np.random.default_rng(seed)
    B = sp.random(n, n, density=0.03, random_state=rng) + sp.identity(n)
    return (B @ B.T).tocsr(), sp.diags(rng.uniform(0.5, 2.0, n)).tocsr()


def test_identity_pencil():
    I = sp.identity(40, format="csr")
    res = smallest_eigenpairs(I, I, 5)
    np.testing.assert_allclose(res.eigenvalues, 1.0, rtol=1e-14)


def test_laplace_matches_analytic(oracle):
    prob = assemble_laplace(Grid(S, 64, 64))
    res = smallest_eigenpairs(prob.K, prob.M, 10)
    assert res.method == "iterative"
    np.testing.assert_allclose(res.eigenvalues, oracle["unit_square_dirichlet"][:10], rtol=0.01)


@pytest.mark.parametrize("seed", [0, 1])
def test_iterative_agrees_with_dense(seed):
    K, M = random_pencil(200, seed)
    it = smallest_eigenpairs(K, M, 40, method="iterative").eigenvalues
    de = smallest_eigenpairs(K, M, 40, method="dense").eigenvalues
    np.testing.assert_allclose(it, de, rtol=1e-8)


def test_residuals_recomputed():
    K, M = random_pencil(200, 5)
    res = smallest_eigenpairs(K, M, 20, tol=1e-9, method="iterative")
    again = residual_norms(K, M, res.eigenvalues, res.eigenvectors)
    np.testing.assert_allclose(again, res.residuals, rtol=1e-6, atol=1e-15)
    assert again.max() <= 1e-9


def test_eigenvectors_are_M_orthonormal():
    K, M = random_pencil(200, 2)
    V = smallest_eigenpairs(K, M, 10, method="iterative").eigenvectors
    np.testing.assert_allclose(V.T @ (M @ V), np.eye(10), atol=1e-10)


def test_count_contract():
    K, M = random_pencil(40, 0)
    with pytest.raises(ContractError):
        smallest_eigenpairs(K, M, 11)
    with pytest.raises(ContractError):
        smallest_eigenpairs(K, M, 0)


def test_interval_count_matches_inertia():
    g = Grid(S, 48, 48)
    rng = np.random.default_rng(0)
    prob = assemble_eps_problem(g, rng.random((48, 48)) < 0.4, np.eye(2), 1 / 6)
    lo, hi = 5.0, 60.0
    it = eigenvalues_in_interval(prob.K, prob.M, lo, hi, method="iterative")
    de = eigenvalues_in_interval(prob.K, prob.M, lo, hi, method="dense")
    assert it.eigenvalues.size == inertia_below(prob.K, prob.M, hi) - inertia_below(prob.K, prob.M, lo)
    np.testing.assert_allclose(it.eigenvalues, de.eigenvalues, rtol=1e-8)


def test_empty_interval():
    prob = assemble_laplace(Grid(S, 16, 16))
    res = eigenvalues_in_interval(prob.K, prob.M, 0.0, 10.0)
    assert res.eigenvalues.size == 0
    with pytest.raises(ContractError):
        eigenvalues_in_interval(prob.K, prob.M, 5.0, 5.0)


def test_inertia_counts_dense_spectrum():
    K, M = random_pencil(100, 4)
    w = sla.eigh(K.toarray(), M.toarray(), eigvals_only=True)
    for sigma in np.percentile(w, [10, 50, 90]):
        assert inertia_below(K, M, sigma) == np.count_nonzero(w < sigma)


def test_pcg_solves_spd_system():
    prob = assemble_laplace(Grid(S, 32, 32))
    A = (prob.K + prob.M).tocsr()
    b = np.random.default_rng(0).standard_normal(prob.n)
    x = pcg(A, b, rtol=1e-10)
    assert np.linalg.norm(A @ x - b) <= 1e-9 * np.linalg.norm(b)


def test_shrinking_domain_raises_eigenvalues():
    from stochhom.grid_fem import assemble_subdomain_laplace

    g = Grid(S, 32, 32)
    big = np.zeros((32, 32), dtype=bool)
    big[4:28, 4:28] = True
    small = big.copy()
    small[4:10, 4:28] = False
    lows = []
    for mask in (big, small):
        sub = assemble_subdomain_laplace(g, mask)
        lows.append(smallest_eigenpairs(sub.K, sub.M, 5).eigenvalues)
    assert np.all(lows[1] >= lows[0])
