import numpy as np
import pytest
import scipy.sparse as sp

from edgems.integrate.phi import Phi1Action, phi1_dense, phi1_scalar
from oracles import phi1_augmented, phi1_eig, phi1_taylor_ld, random_matrix


def test_zero_matrix_gives_identity():
    assert np.abs(phi1_dense(np.zeros((4, 4))) - np.eye(4)).max() <= 1e-15


def test_scalar_values():
    assert phi1_scalar(-1.0) == pytest.approx(1 - np.exp(-1), rel=1e-15)
    assert phi1_scalar(0.0) == 1.0
    assert phi1_dense(np.array([[-1.0]]))[0, 0] == pytest.approx(0.6321205588285577, rel=1e-14)


def test_scalar_small_argument_continuity():
    z = np.array([-2e-5, -1e-5, -9.99e-6, 1e-6, 1e-5])
    assert np.allclose(phi1_scalar(z), np.expm1(z) / z, rtol=1e-15, atol=0)


@pytest.mark.parametrize("n", [1, 5, 20])
def test_matches_taylor_oracle(rng, n):
    for _ in range(5):
        X = random_matrix(rng, n, 5.0)
        ref = phi1_taylor_ld(X)
        assert np.linalg.norm(phi1_dense(X) - ref) <= 1e-10 * np.linalg.norm(ref)


def test_taylor_oracle_agrees_with_eigendecomposition(rng):
    X = random_matrix(rng, 8, 3.0)
    assert np.allclose(phi1_taylor_ld(X), phi1_eig(X).real, rtol=1e-9, atol=1e-12)
    assert np.allclose(phi1_taylor_ld(X), phi1_augmented(X), rtol=1e-10, atol=1e-13)


def test_identity_with_exponential(rng):
    X = random_matrix(rng, 25, 8.0)
    P, E = phi1_dense(X, return_expm=True)
    lhs = X @ P
    assert np.linalg.norm(lhs - (E - np.eye(25))) <= 1e-9 * np.linalg.norm(E - np.eye(25))


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        phi1_dense(np.ones((2, 3)))
    with pytest.raises(ValueError):
        phi1_dense(np.array([[np.nan]]))


def test_contour_action_matches_dense(rng):
    n = 40
    A = sp.diags([-1, 2.0, -1], [-1, 0, 1], shape=(n, n)) * 50
    C = sp.diags([-1, 1.0], [-1, 1], shape=(n, n)) * 3
    M = sp.diags([1, 4.0, 1], [-1, 0, 1], shape=(n, n)) / 6
    K = (A + C).tocsc()
    tau = 0.05
    L = np.linalg.solve(M.toarray(), K.toarray())
    v = rng.standard_normal(n)
    ref = phi1_dense(-tau * L) @ v
    act = Phi1Action(M, K, tau, nodes=16)
    assert np.linalg.norm(act(v) - ref) <= 1e-7 * np.linalg.norm(ref)
    b = M @ v
    assert np.allclose(act.apply_to_load(b), act(v), rtol=1e-12, atol=1e-14)
