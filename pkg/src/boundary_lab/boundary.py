"""Discretized boundary triples and the generators they induce.

A triple lives on the uniform grid ``x_j = j h`` of ``[0, pi]`` with
``h = pi / (n + 1)``.  The boundary-space vectors ``Z`` are the grid values at
nodes ``0..n``; node ``n + 1`` (``x = pi``) carries the homogeneous Dirichlet
condition and is never stored.  ``Am`` acts on ``Z`` and returns values at the
interior nodes ``1..n``, while ``G`` and ``M`` are scalar trace functionals on
``Z``.

State vectors are interior values expressed in the orthonormal coordinates of
a diagonal inner product ``<f, g> = sum_j w_j f_j conj(g_j)``; the weights are
chosen so that the unperturbed generator is Hermitian, and they reduce to the
plain quadrature weight ``h`` away from ``x = 0``.  Euclidean norms of state
vectors therefore approximate L^2 norms.

In finite dimensions the extrapolation space coincides with the state space,
so ``A_{-1}`` is ``A`` and the Yosida extension of the observation is an
ordinary row.  Eliminating the boundary node leaves a direct feedthrough
``D = M_0 / G_0`` which is O(h) for the heat triple and vanishes in the
continuum limit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    ConstraintEliminationFailed,
    FeedbackSingular,
    GridTooSmall,
    LambdaInSpectrum,
    ValidationError,
)
from .linalg import as_matrix, eig_hermitian, is_hermitian, solve_linear

SPECTRUM_DISTANCE = 1e-6
FEEDBACK_TOL = 1e-8
SCHEMA_ID = "fd2-onesided-v1"


@dataclass(frozen=True, eq=False)
class BoundaryTriple:
    """Discrete boundary system ``(Am, G, M, P)``."""

    n: int
    Am: np.ndarray
    G: np.ndarray
    M: np.ndarray
    P: np.ndarray
    scheme: str = SCHEMA_ID
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = self.n
        object.__setattr__(self, "Am", as_matrix(self.Am, name="Am"))
        object.__setattr__(self, "G", np.asarray(self.G, dtype=np.complex128).ravel())
        object.__setattr__(self, "M", np.asarray(self.M, dtype=np.complex128).ravel())
        object.__setattr__(self, "P", as_matrix(self.P, name="P"))
        if self.Am.shape != (n, n + 1):
            raise ValidationError(f"Am must be {n}x{n + 1}, got {self.Am.shape}")
        if self.G.shape != (n + 1,) or self.M.shape != (n + 1,):
            raise ValidationError("G and M must be rows of length n + 1")
        if self.P.shape != (n, n):
            raise ValidationError(f"P must be {n}x{n}")
        if not np.any(self.G):
            raise ValidationError("G must be a nonzero functional")

    @property
    def h(self) -> float:
        return np.pi / (self.n + 1)

    @property
    def grid(self) -> np.ndarray:
        """All nodes ``0..n+1`` including ``x = pi``."""
        return np.arange(self.n + 2) * self.h

    @property
    def interior(self) -> np.ndarray:
        return self.grid[1:-1]

    @property
    def weights(self) -> np.ndarray:
        if "weights" not in self._cache:
            self._cache["weights"] = _symmetrizing_weights(
                _eliminate(self.Am, self.G)[0], self.h)
        return self._cache["weights"]

    def to_state(self, values) -> np.ndarray:
        """Interior grid values -> orthonormal state coordinates."""
        return np.sqrt(self.weights) * np.asarray(values, dtype=np.complex128)

    def from_state(self, x) -> np.ndarray:
        """State coordinates -> interior grid values."""
        x = np.asarray(x, dtype=np.complex128)
        s = np.sqrt(self.weights)
        return x / (s if x.ndim == 1 else s[:, None])

    def with_feedback(self, M) -> "BoundaryTriple":
        return BoundaryTriple(self.n, self.Am, self.G, M, self.P, self.scheme)

    def with_coupling(self, P) -> "BoundaryTriple":
        return BoundaryTriple(self.n, self.Am, self.G, self.M, P, self.scheme)

    # serialization -----------------------------------------------------
    def to_json(self) -> str:
        def enc(a):
            a = np.asarray(a)
            return {"re": a.real.tolist(), "im": a.imag.tolist()}

        return json.dumps({
            "n": self.n, "scheme": self.scheme,
            "Am": enc(self.Am), "G": enc(self.G), "M": enc(self.M), "P": enc(self.P),
        })

    @classmethod
    def from_json(cls, text: str) -> "BoundaryTriple":
        doc = json.loads(text)

        def dec(d):
            return np.asarray(d["re"]) + 1j * np.asarray(d["im"])

        return cls(int(doc["n"]), dec(doc["Am"]), dec(doc["G"]), dec(doc["M"]),
                   dec(doc["P"]), doc.get("scheme", SCHEMA_ID))


class Generator:
    """A semigroup generator on the state space.

    ``matrix`` is the dense representation; generators built with
    :meth:`from_diagonal` keep only their diagonal so that very large normal
    test operators stay cheap.  ``symmetrizer`` is a positive vector ``s``
    with ``diag(s) A diag(1/s)`` Hermitian, when such a diagonal similarity
    exists.  ``A_{-1}`` and ``A`` coincide at matrix scale.
    """

    def __init__(self, matrix=None, label: str = "", *, diagonal=None,
                 symmetrizer=None, growth_bound: float | None = None):
        if (matrix is None) == (diagonal is None):
            raise ValueError("pass exactly one of matrix / diagonal")
        self._dense = None if matrix is None else as_matrix(matrix)
        self.diagonal = None if diagonal is None else np.asarray(diagonal, dtype=np.complex128)
        self.symmetrizer = None if symmetrizer is None else np.asarray(symmetrizer, dtype=float)
        self.label = label
        self._growth = growth_bound

    @classmethod
    def from_diagonal(cls, diagonal, label: str = "") -> "Generator":
        return cls(diagonal=diagonal, label=label)

    @property
    def dim(self) -> int:
        return len(self.diagonal) if self.diagonal is not None else self._dense.shape[0]

    @cached_property
    def matrix(self) -> np.ndarray:
        if self._dense is not None:
            return self._dense
        return np.diag(self.diagonal)

    @property
    def is_diagonal(self) -> bool:
        return self.diagonal is not None

    @cached_property
    def symmetrized(self) -> np.ndarray | None:
        if self.symmetrizer is None:
            return None
        s = self.symmetrizer
        return s[:, None] * self.matrix / s[None, :]

    @property
    def hermitian(self) -> bool:
        return self.symmetrizer is not None and bool(np.all(self.symmetrizer == 1.0))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Spectrum, ordered by decreasing real part."""
        if self.diagonal is not None:
            ev = self.diagonal
        elif self.symmetrized is not None:
            ev = eig_hermitian(self.symmetrized).eigenvalues.astype(np.complex128)
        else:
            ev = np.linalg.eigvals(self.matrix)
        return ev[np.argsort(-ev.real, kind="stable")]

    @property
    def growth_bound(self) -> float:
        if self._growth is None:
            self._growth = float(self.eigenvalues[0].real)
        return self._growth

    def __repr__(self):
        return f"Generator(dim={self.dim}, label={self.label!r}, growth_bound={self.growth_bound:.6g})"


@dataclass(frozen=True)
class DirichletOperator:
    lam: complex
    lift: np.ndarray  # grid values at nodes 0..n
    B: np.ndarray     # state coordinates

    @property
    def lift_full(self) -> np.ndarray:
        """Lift including the Dirichlet node at ``x = pi``."""
        return np.append(self.lift, 0.0)


@dataclass(frozen=True)
class LinearSystem:
    """Boundary control system ``(A, B, C, D)`` in state coordinates.

    ``C`` observes ``M`` on the domain of ``A``; ``C_cl`` observes ``M`` on the
    domain of the closed-loop generator, so that ``A_cl = A + B C_cl``.
    """

    A: Generator
    B: np.ndarray
    C: np.ndarray
    D: complex
    C_cl: np.ndarray


def _eliminate(Am: np.ndarray, K: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eliminate node 0 through the constraint ``K f = 0``.

    Returns the raw (grid-value) generator and the row expressing ``f_0`` in
    terms of the interior values.
    """
    scale = np.max(np.abs(K))
    if scale == 0.0 or abs(K[0]) <= 1e-12 * scale:
        raise ConstraintEliminationFailed("constraint row has no weight on the boundary node")
    row = -K[1:] / K[0]
    return Am[:, 1:] + np.outer(Am[:, 0], row), row


def _symmetrizing_weights(a: np.ndarray, h: float) -> np.ndarray:
    """Diagonal weights making a tridiagonal ``a`` self-adjoint.

    Falls back to uniform weights when no positive diagonal similarity exists.
    """
    n = a.shape[0]
    w = np.full(n, h)
    if n < 2 or np.any(np.triu(a, 2)) or np.any(np.tril(a, -2)):
        return w
    up, lo = np.diag(a, 1), np.diag(a, -1)
    if np.any(np.abs(up.imag) > 0) or np.any(np.abs(lo.imag) > 0):
        return w
    ratio = lo.real / np.where(up.real == 0, np.nan, up.real)
    if not np.all(np.isfinite(ratio)) or np.any(ratio <= 0):
        return w
    # w_j a_{j,j+1} = w_{j+1} a_{j+1,j}; normalise so the last weight is h
    logw = np.concatenate([[0.0], np.cumsum(-np.log(ratio))])
    return h * np.exp(logw - logw[-1])


def _tridiagonal_symmetrizer(a: np.ndarray) -> np.ndarray | None:
    """``s`` with ``diag(s) a diag(1/s)`` symmetric, for real tridiagonal ``a``."""
    n = a.shape[0]
    if n < 2:
        return np.ones(n)
    if np.any(np.triu(a, 2)) or np.any(np.tril(a, -2)):
        return None
    up, lo = np.diag(a, 1), np.diag(a, -1)
    if np.any(up.imag) or np.any(lo.imag) or np.any(np.diag(a).imag):
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = up.real / lo.real
    if not np.all(np.isfinite(ratio)) or np.any(ratio <= 0):
        return None
    # s_{j+1} / s_j = sqrt(up_j / lo_j)
    logs = np.concatenate([[0.0], np.cumsum(0.5 * np.log(ratio))])
    return np.exp(logs - logs[-1])


def build_heat_triple(n: int, *, feedback_gain: float = 1.0,
                      coupling: float = 0.1) -> BoundaryTriple:
    """Heat equation on ``[0, pi]`` with ``Gf = f'(0)``, ``Mf = -gain f(0)``.

    ``Am`` is the central second difference, ``G`` the one-sided second-order
    derivative stencil and ``P = coupling * I``.
    """
    if n < 8:
        raise GridTooSmall(f"n must be at least 8, got {n}")
    h = np.pi / (n + 1)
    Am = np.zeros((n, n + 1))
    rows = np.arange(n)
    Am[rows, rows] = 1.0            # node j - 1
    Am[rows, rows + 1] = -2.0       # node j
    Am[rows[:-1], rows[:-1] + 2] = 1.0  # node j + 1 (node n + 1 is zero)
    Am /= h * h
    G = np.zeros(n + 1)
    G[:3] = np.array([-3.0, 4.0, -1.0]) / (2.0 * h)
    M = np.zeros(n + 1)
    M[0] = -feedback_gain
    return BoundaryTriple(n, Am, G, M, coupling * np.eye(n))


def _scaled(triple: BoundaryTriple, raw: np.ndarray) -> np.ndarray:
    s = np.sqrt(triple.weights)
    return s[:, None] * raw / s[None, :]


def _make_generator(triple: BoundaryTriple, K: np.ndarray, label: str) -> Generator:
    raw, _ = _eliminate(triple.Am, K)
    a = _scaled(triple, raw)
    if is_hermitian(a, 1e-12):
        return Generator(a, label, symmetrizer=np.ones(triple.n))
    s = _tridiagonal_symmetrizer(a)
    if s is not None and not is_hermitian(s[:, None] * a / s[None, :], 1e-8):
        s = None
    return Generator(a, label, symmetrizer=s)


def restrict_generator(triple: BoundaryTriple) -> Generator:
    """``A = Am`` on ``ker G``."""
    key = "A"
    if key not in triple._cache:
        triple._cache[key] = _make_generator(triple, triple.G, "unperturbed")
    return triple._cache[key]


def perturbed_generator(triple: BoundaryTriple) -> Generator:
    """``Am`` on ``{f : G f = M f}``; labelled ``boundary-feedback``."""
    key = "Acl"
    if key not in triple._cache:
        triple._cache[key] = _make_generator(triple, triple.G - triple.M, "boundary-feedback")
    return triple._cache[key]


def _check_resolvent_set(gen: Generator, lam: complex) -> None:
    dist = np.min(np.abs(gen.eigenvalues - lam))
    if dist <= SPECTRUM_DISTANCE:
        raise LambdaInSpectrum(f"lambda={lam} lies within {dist:.2e} of the spectrum of {gen.label}")


def dirichlet_operator(triple: BoundaryTriple, lam: complex) -> DirichletOperator:
    """Solve ``(lam - Am) d = 0`` at interior nodes with ``G d = 1``."""
    _check_resolvent_set(restrict_generator(triple), lam)
    n = triple.n
    bordered = np.zeros((n + 1, n + 1), dtype=np.complex128)
    bordered[:n] = -triple.Am
    bordered[np.arange(n), np.arange(1, n + 1)] += lam
    bordered[n] = triple.G
    rhs = np.zeros(n + 1, dtype=np.complex128)
    rhs[n] = 1.0
    lift = solve_linear(bordered, rhs)
    A = restrict_generator(triple).matrix
    d_state = triple.to_state(lift[1:])
    B = lam * d_state - A @ d_state
    return DirichletOperator(complex(lam), lift, B)


def control_operator(triple: BoundaryTriple) -> np.ndarray:
    """``B = (lam - A) D_lam``, independent of ``lam`` after elimination."""
    return triple.to_state(triple.Am[:, 0] / triple.G[0])


def boundary_system(triple: BoundaryTriple) -> LinearSystem:
    """The boundary control system ``(A, B, C, D)`` of the triple."""
    _, row_a = _eliminate(triple.Am, triple.G)
    _, row_cl = _eliminate(triple.Am, triple.G - triple.M)
    s = np.sqrt(triple.weights)
    C = (triple.M[0] * row_a + triple.M[1:]) / s
    C_cl = (triple.M[0] * row_cl + triple.M[1:]) / s
    D = complex(triple.M[0] / triple.G[0])
    return LinearSystem(restrict_generator(triple), control_operator(triple), C, D, C_cl)


def resolvent(gen: Generator, lam: complex) -> np.ndarray:
    """``R(lam, A) = (lam - A)^{-1}``."""
    _check_resolvent_set(gen, lam)
    n = gen.dim
    return solve_linear(lam * np.eye(n) - gen.matrix, np.eye(n, dtype=np.complex128))


def spectrum_condition(triple: BoundaryTriple, lam: complex) -> tuple[bool, complex]:
    """Return ``(|1 - M D_lam| > 1e-8, M D_lam)``."""
    d = dirichlet_operator(triple, lam)
    m = complex(triple.M @ d.lift)
    return abs(1.0 - m) > FEEDBACK_TOL, m


def perturbed_resolvent(triple: BoundaryTriple, lam: complex) -> np.ndarray:
    """``(I - D_lam M)^{-1} R(lam, A)`` assembled on boundary-space vectors."""
    d = dirichlet_operator(triple, lam)
    m = complex(triple.M @ d.lift)
    if abs(1.0 - m) <= FEEDBACK_TOL:
        raise FeedbackSingular(f"1 is in the spectrum of M D_lam at lambda={lam}")
    R = resolvent(restrict_generator(triple), lam)
    _, row_a = _eliminate(triple.Am, triple.G)
    interior = triple.from_state(R)
    full = np.vstack([row_a @ interior, interior])
    # Sherman-Morrison for the rank-one D_lam M
    full = full + np.outer(d.lift, triple.M @ full) / (1.0 - m)
    return np.sqrt(triple.weights)[:, None] * full[1:]


def heat_eigenvalues(count: int) -> np.ndarray:
    """Eigenvalues ``-(k + 1/2)^2`` of ``f'' `` with ``f'(0) = 0, f(pi) = 0``."""
    k = np.arange(count)
    return -(k + 0.5) ** 2


def feedback_roots(count: int) -> np.ndarray:
    """First ``count`` positive roots of ``tan(pi mu) = mu``.

    Root ``k`` (``k >= 1``) lies in ``(k - 1/2, k + 1/2)``.
    """
    from scipy.optimize import brentq

    eps = 1e-12
    return np.array([brentq(lambda m: np.tan(np.pi * m) - m, k - 0.5 + eps, k + 0.5 - eps,
                            xtol=1e-15) for k in range(1, count + 1)])


def feedback_growth_root() -> float:
    """Positive root of ``tanh(pi nu) = nu``; ``nu^2`` is the unstable eigenvalue."""
    from scipy.optimize import brentq

    return brentq(lambda v: np.tanh(np.pi * v) - v, 0.5, 1.5, xtol=1e-15)


def dirichlet_closed_form(x, lam: complex) -> np.ndarray:
    """Continuous Dirichlet lift of the heat triple for ``u = 1``."""
    x = np.asarray(x, dtype=float)
    if lam == 0:
        return (x - np.pi).astype(np.complex128)
    r = np.sqrt(complex(lam))
    return np.sinh(r * (x - np.pi)) / (r * np.cosh(r * np.pi))
