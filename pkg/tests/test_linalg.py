import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from boundary_lab.errors import (
    DimensionMismatch,
    NonFiniteEntries,
    NotHermitian,
    SingularMatrix,
)
from boundary_lab.linalg import (
    as_matrix,
    eig_hermitian,
    is_hermitian,
    matrix_exponential,
    operator_norm,
    singular_values,
    solve_linear,
)


def random_complex(rng, n, scale=1.0):
    return scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))


def test_as_matrix_shapes():
    assert as_matrix(3.0).shape == (1, 1)
    assert as_matrix([1, 2, 3]).shape == (3, 1)
    assert as_matrix(np.ones((2, 4))).dtype == np.complex128
    with pytest.raises(DimensionMismatch):
        as_matrix(np.ones((2, 2, 2)))
    with pytest.raises(NonFiniteEntries):
        as_matrix([[1.0, np.nan]])


@pytest.mark.parametrize("scale", [1e-3, 0.3, 1.0, 5.0, 40.0])
def test_expm_matches_scipy(rng, scale):
    a = random_complex(rng, 12, scale)
    ref = scipy.linalg.expm(a)
    got = matrix_exponential(a)
    assert np.linalg.norm(got - ref) <= 1e-11 * np.linalg.norm(ref)


def test_expm_zero_and_diagonal():
    assert np.allclose(matrix_exponential(np.zeros((4, 4))), np.eye(4))
    d = np.array([-1.0, 0.5, 2j])
    assert np.allclose(matrix_exponential(np.diag(d), 0.7), np.diag(np.exp(0.7 * d)), atol=1e-14)


def test_expm_stiff_heat_matrix():
    n = 60
    h = np.pi / (n + 1)
    a = (np.diag(-2 * np.ones(n)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)) / h**2
    ref = scipy.linalg.expm(0.5 * a)
    assert np.max(np.abs(matrix_exponential(a, 0.5) - ref)) < 1e-12


small = arrays(np.float64, (5, 5), elements=st.floats(-2, 2, allow_nan=False))


@settings(max_examples=40, deadline=None)
@given(small, st.floats(0.0, 1.5), st.floats(0.0, 1.5))
def test_expm_semigroup_law(a, t, s):
    lhs = matrix_exponential(a, t) @ matrix_exponential(a, s)
    rhs = matrix_exponential(a, t + s)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(1.0, np.linalg.norm(rhs))


@settings(max_examples=40, deadline=None)
@given(small)
def test_expm_determinant_is_exp_trace(a):
    det = np.linalg.det(matrix_exponential(a))
    assert np.isclose(det, np.exp(np.trace(a)), rtol=1e-9)


@settings(max_examples=40, deadline=None)
@given(small)
def test_hermitian_decomposition_reconstructs(a):
    herm = a + a.T
    dec = eig_hermitian(herm)
    assert np.all(np.diff(dec.eigenvalues) >= 0)
    assert np.allclose(dec.reconstruct(), herm, atol=1e-10)


def test_solve_linear_vector_and_matrix(rng):
    a = random_complex(rng, 8) + 8 * np.eye(8)
    b = rng.standard_normal(8)
    x = solve_linear(a, b)
    assert x.shape == (8,)
    assert np.allclose(a @ x, b)
    X = solve_linear(a, np.eye(8))
    assert np.allclose(a @ X, np.eye(8))


def test_solve_linear_errors():
    with pytest.raises(SingularMatrix):
        solve_linear(np.zeros((3, 3)), np.ones(3))
    with pytest.raises(SingularMatrix):
        solve_linear(np.array([[1.0, 1.0], [1.0, 1.0]]), np.ones(2))
    with pytest.raises(DimensionMismatch):
        solve_linear(np.eye(3), np.ones(4))
    with pytest.raises(DimensionMismatch):
        solve_linear(np.ones((2, 3)), np.ones(2))


def test_eig_hermitian_rejects_non_hermitian():
    assert not is_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(NotHermitian):
        eig_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_singular_values_and_norm(rng):
    a = random_complex(rng, 6)
    sv = singular_values(a)
    assert np.all(np.diff(sv) <= 0)
    assert np.isclose(operator_norm(a), np.linalg.norm(a, 2))


# worked examples --------------------------------------------------------------

def test_solve_small_cases(rng):
    b = rng.standard_normal((3, 2))
    assert np.allclose(solve_linear(np.eye(3), b), b)
    assert np.allclose(solve_linear(np.diag([2.0, 4.0]), np.array([2.0, 4.0])), [1.0, 1.0])


def test_solve_recovers_known_solution(rng):
    q, _ = np.linalg.qr(rng.standard_normal((20, 20)))
    a = q @ np.diag(np.linspace(1, 10, 20)) @ q.T
    x_true = rng.standard_normal((20, 3))
    x = solve_linear(a, a @ x_true)
    assert np.linalg.norm(x - x_true) <= 1e-10 * np.linalg.norm(x_true)


def test_hermitian_eigen_small_cases(rng):
    assert np.allclose(eig_hermitian(np.diag([3.0, 1.0, 2.0])).eigenvalues, [1, 2, 3])
    assert np.allclose(eig_hermitian(np.array([[0.0, 1.0], [1.0, 0.0]])).eigenvalues, [-1, 1])
    a = random_complex(rng, 10)
    a = a + a.conj().T
    dec = eig_hermitian(a)
    v = dec.eigenvectors
    assert np.linalg.norm(a @ v - v * dec.eigenvalues) <= 1e-10 * np.linalg.norm(a, 2)
    assert np.allclose(v.conj().T @ v, np.eye(10), atol=1e-10)


def test_expm_small_cases(rng):
    a = random_complex(rng, 5)
    assert np.allclose(matrix_exponential(a, 0.0), np.eye(5))
    assert np.allclose(matrix_exponential(np.diag([-1.0, -2.0])), np.diag(np.exp([-1.0, -2.0])))
    h = a + a.conj().T
    dec = eig_hermitian(h)
    ref = (dec.eigenvectors * np.exp(0.3 * dec.eigenvalues)) @ dec.eigenvectors.conj().T
    assert np.linalg.norm(matrix_exponential(h, 0.3) - ref) <= 1e-10 * np.linalg.norm(ref)


def test_singular_value_cases(rng):
    assert np.allclose(singular_values(np.eye(4)), 1.0)
    assert np.allclose(singular_values(np.diag([3.0, -4.0])), [4.0, 3.0])
    a = random_complex(rng, 6)
    gram = eig_hermitian(a.conj().T @ a).eigenvalues[::-1]
    assert np.allclose(singular_values(a), np.sqrt(gram))


def test_operator_norm_cases(rng):
    assert operator_norm(np.zeros((3, 3))) == 0.0
    assert np.isclose(operator_norm(np.diag([1.0, 5.0])), 5.0)
    for _ in range(10):
        a, b = random_complex(rng, 6), random_complex(rng, 6)
        assert operator_norm(a @ b) <= operator_norm(a) * operator_norm(b) * (1 + 1e-12)
