"""Dense complex linear algebra used by every other module.

Matrices are plain ``numpy`` arrays of dtype ``complex128``; :func:`as_matrix`
is the single entry point that validates shape and finiteness.  The
factorizations delegate to LAPACK through numpy/scipy, while the matrix
exponential is a scaling-and-squaring Pade implementation written here so its
backward-error bound is explicit.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    NoConvergence,
    NonFiniteEntries,
    NotHermitian,
    SingularMatrix,
)

PIVOT_TOL = 1e-13
HERMITIAN_TOL = 1e-10


def as_matrix(a, *, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D complex128 array.

    1-D input is treated as a column.  Raises NonFiniteEntries on NaN/Inf.
    """
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(-1, 1)
    elif m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteEntries(f"{name} has non-finite entries")
    return m


def _require_square(a: np.ndarray, name: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {a.shape}")


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def solve_linear(a, b) -> np.ndarray:
    """Solve ``A X = B`` by LU with partial pivoting.

    Raises SingularMatrix when a pivot falls below ``1e-13 * ||A||_1``.
    """
    a = as_matrix(a, name="A")
    b_in = np.asarray(b)
    b = as_matrix(b, name="B")
    _require_square(a, "A")
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"A is {a.shape}, B has {b.shape[0]} rows")
    scale = np.linalg.norm(a, 1)
    if scale == 0.0:
        raise SingularMatrix("A is the zero matrix")
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularMatrix
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    if np.min(np.abs(np.diag(lu))) <= PIVOT_TOL * scale:
        raise SingularMatrix("pivot below threshold")
    x = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    return x.ravel() if b_in.ndim == 1 else x


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    scale = np.linalg.norm(a)
    return bool(np.linalg.norm(a - a.conj().T) <= tol * max(scale, 1e-300))


def eig_hermitian(a) -> SpectralDecomposition:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.

    Frobenius norms are used for the Hermitian check.
    """
    a = as_matrix(a)
    _require_square(a, "A")
    if not is_hermitian(a):
        raise NotHermitian("||A - A*|| exceeds 1e-10 ||A||")
    herm = 0.5 * (a + a.conj().T)
    try:
        w, v = np.linalg.eigh(herm)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NoConvergence(str(exc)) from exc
    return SpectralDecomposition(w, v)


# Pade coefficients and theta thresholds (Higham 2005, double precision)
_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}
_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1,
          7: 9.504178996162932e-1, 9: 2.097847961257068e0,
          13: 5.371920351148152e0}


def _pade_uv(a: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE[m]
    ident = np.eye(a.shape[0], dtype=a.dtype)
    a2 = a @ a
    if m < 13:
        powers = [ident, a2]
        for _ in range(2, m // 2 + 1):
            powers.append(powers[-1] @ a2)
        u = sum(b[2 * j + 1] * powers[j] for j in range(len(powers)))
        v = sum(b[2 * j] * powers[j] for j in range(len(powers)))
        return a @ u, v
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    return u, v


def matrix_exponential(a, t: float = 1.0) -> np.ndarray:
    """``exp(t A)`` by scaling and squaring with a diagonal Pade approximant.

    Degree selection follows the 1-norm thresholds for unit roundoff, so the
    backward error of the scaled approximant stays below about 1e-16.
    """
    a = as_matrix(a) * t
    _require_square(a, "A")
    if not np.isfinite(t):
        raise NonFiniteEntries("t must be finite")
    n = a.shape[0]
    norm1 = np.linalg.norm(a, 1)
    if norm1 == 0.0:
        return np.eye(n, dtype=np.complex128)
    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            u, v = _pade_uv(a, m)
            return solve_linear(v - u, v + u)
    s = max(0, int(np.ceil(np.log2(norm1 / _THETA[13]))))
    u, v = _pade_uv(a / 2.0**s, 13)
    r = solve_linear(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def singular_values(a) -> np.ndarray:
    """Singular values in descending order."""
    a = as_matrix(a)
    try:
        return np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NoConvergence(str(exc)) from exc


def operator_norm(a) -> float:
    a = as_matrix(a)
    if a.size == 0:
        return 0.0
    return float(singular_values(a)[0])
