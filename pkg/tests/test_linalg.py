import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from cbmorph import linalg
from cbmorph.errors import DecompositionError, DimensionError, SingularSystemError

from .conftest import random_spd


def test_eig_matches_scipy_oracle():
    rng = np.random.default_rng(3)
    K, M = random_spd(rng, 12, 50.0), random_spd(rng, 12, 5.0)
    ep = linalg.sym_generalized_eig(K, M, 5)
    ref = sla.eigh(K, M, eigvals_only=True)[:5]
    np.testing.assert_allclose(ep.values, ref, rtol=1e-12)
    np.testing.assert_allclose(ep.vectors.T @ M @ ep.vectors, np.eye(5), atol=1e-12)
    np.testing.assert_allclose(K @ ep.vectors, M @ ep.vectors * ep.values, atol=1e-9)


def test_eig_sign_convention():
    rng = np.random.default_rng(4)
    K, M = random_spd(rng, 8), np.eye(8)
    V = linalg.sym_generalized_eig(K, M, 8).vectors
    for col in V.T:
        assert col[np.argmax(np.abs(col))] > 0


def test_eig_frequencies_hz_of_unit_oscillator():
    ep = linalg.sym_generalized_eig(np.array([[4.0 * np.pi**2]]), np.eye(1), 1)
    assert ep.frequencies_hz[0] == pytest.approx(1.0)


def test_eig_rejects_indefinite_mass():
    with pytest.raises(DecompositionError):
        linalg.sym_generalized_eig(np.eye(2), np.diag([1.0, -1.0]), 1)


def test_eig_rejects_bad_q():
    with pytest.raises(DimensionError):
        linalg.sym_generalized_eig(np.eye(3), np.eye(3), 4)


def test_numerical_rank_and_rcond():
    A = np.diag([1.0, 1e-3, 1e-12])
    assert linalg.numerical_rank(A) == 2
    assert linalg.numerical_rank(A, tau=1e-13) == 3
    assert linalg.rcond(A) == pytest.approx(1e-12)
    assert linalg.numerical_rank(np.zeros((3, 3))) == 0


def test_svd_reconstructs():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 4))
    np.testing.assert_allclose(linalg.svd(A).reconstruct(), A, atol=1e-13)


def test_slogdet_sign():
    s, l = linalg.slogdet(np.diag([-2.0, 3.0]))
    assert s == -1.0 and l == pytest.approx(np.log(6.0))


def test_solve_real_and_complex():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    b = np.array([1.0, 2.0])
    np.testing.assert_allclose(A @ linalg.solve(A, b), b)
    Ac = A + 1j * np.eye(2)
    x = linalg.solve(Ac, b, "complex")
    np.testing.assert_allclose(Ac @ x, b, atol=1e-14)


def test_solve_singular_reports_rcond():
    with pytest.raises(SingularSystemError) as info:
        linalg.solve(np.array([[1.0, 1.0], [1.0, 1.0 + 1e-17]]), np.ones(2))
    assert info.value.rcond is not None and info.value.rcond <= 1e-14


def test_factorization_reuse_and_transpose():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((5, 5)) + 5 * np.eye(5)
    fac = linalg.Factorization(A)
    B = rng.standard_normal((5, 3))
    np.testing.assert_allclose(A @ fac.solve(B), B, atol=1e-12)
    np.testing.assert_allclose(A.T @ fac.solve(B, trans=True), B, atol=1e-12)
    assert 0 < fac.rcond <= 1


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 10), st.integers(0, 10_000))
def test_eig_orthonormality_property(n, seed):
    rng = np.random.default_rng(seed)
    K, M = random_spd(rng, n, 100.0), random_spd(rng, n, 10.0)
    ep = linalg.sym_generalized_eig(K, M, n)
    assert np.all(np.diff(ep.values) >= -1e-12 * abs(ep.values[-1]))
    np.testing.assert_allclose(ep.vectors.T @ M @ ep.vectors, np.eye(n), atol=1e-9)
