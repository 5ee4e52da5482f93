import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dmcag.errors import InputError, NumericalError, ShapeError
from dmcag.linalg import as_matrix, check_positive, frobenius_norm_sq, matmul, svd_truncated

from oracles import jacobi_eigh, matmul_loops, principal_angles


def test_matmul_matches_loops(rng):
    a, b = rng.normal(size=(5, 7)), rng.normal(size=(7, 3))
    np.testing.assert_allclose(matmul(a, b), matmul_loops(a, b), atol=1e-13)


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_as_matrix_promotes_vectors_and_rejects_bad_input():
    assert as_matrix(np.ones(3)).shape == (1, 3)
    with pytest.raises(ShapeError):
        as_matrix(np.ones((2, 2, 2)))
    with pytest.raises(NumericalError):
        as_matrix([[1.0, np.nan]])


def test_frobenius(rng):
    a = rng.normal(size=(4, 6))
    assert frobenius_norm_sq(a) == pytest.approx(float((a ** 2).sum()), rel=1e-14)


def test_check_positive():
    with pytest.raises(InputError):
        check_positive(0, "k")


@pytest.mark.parametrize("shape", [(30, 8), (8, 30), (12, 12), (1, 5), (5, 1)])
def test_svd_reconstructs_and_is_orthonormal(rng, shape):
    a = rng.normal(size=shape)
    r = min(shape)
    s = svd_truncated(a, r)
    np.testing.assert_allclose(s.reconstruct(), a, atol=1e-12)
    np.testing.assert_allclose(s.u.T @ s.u, np.eye(r), atol=1e-12)
    np.testing.assert_allclose(s.vt @ s.vt.T, np.eye(r), atol=1e-12)
    assert np.all(np.diff(s.sigma) <= 1e-14)
    np.testing.assert_allclose(s.sigma, np.linalg.svd(a, compute_uv=False)[:r], rtol=1e-12)


def test_svd_sign_convention(rng):
    s = svd_truncated(rng.normal(size=(10, 4)), 3)
    idx = np.argmax(np.abs(s.u), axis=0)
    assert np.all(s.u[idx, np.arange(3)] > 0)


def test_svd_rank_deficient_completes_basis(rng):
    a = rng.normal(size=(10, 2)) @ rng.normal(size=(2, 6))
    s = svd_truncated(a, 4)
    np.testing.assert_allclose(s.u.T @ s.u, np.eye(4), atol=1e-12)
    assert s.sigma[2] < 1e-12


def test_svd_left_vectors_match_jacobi_eigenvectors(rng):
    c = rng.random((15, 6))
    w, v = jacobi_eigh(c @ c.T)
    top = v[:, ::-1][:, :3]
    s = svd_truncated(c, 3)
    assert principal_angles(s.u, top).max() < 1e-8
    np.testing.assert_allclose(s.sigma ** 2, w[::-1][:3], rtol=1e-10)


def test_svd_bad_rank(rng):
    with pytest.raises(InputError):
        svd_truncated(rng.normal(size=(4, 3)), 4)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2 ** 31))
def test_svd_property_reconstruction(n, m, seed):
    a = np.random.default_rng(seed).normal(size=(n, m))
    s = svd_truncated(a, min(n, m))
    np.testing.assert_allclose(s.reconstruct(), a, atol=1e-11)
