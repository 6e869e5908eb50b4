"""Boundary integro-differential equations with sector-holomorphic kernels.

The equation ``x' = Am x + int_0^t k(t - s) P x(s) ds`` with ``G x = M x`` is
solved two ways: by direct time stepping, and as the Cauchy problem for the
block generator ``diag(A_cl, d/dz) + [[0, delta_0], [k P, 0]]`` on the
product of the state space with the kernel's shift-invariant subspace.

Kernels are finite sums ``k(z) = sum_j c_j z^m_j exp(-a_j z)``.  Their span
together with all derivatives is the finite family ``{z^m exp(-a z)}``, which
the shift semigroup ``(S(t) f)(z) = f(z + t)`` maps into itself, so the
product-space solve is exact within the model.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .boundary import BoundaryTriple, Generator, perturbed_generator
from .errors import (
    BadExponent,
    FeedbackSingular,
    KernelNotAdmissible,
    QuadratureNotConverged,
    StepUnstable,
    ValidationError,
)
from .linalg import matrix_exponential, operator_norm, solve_linear
from .semigroup import SignalSamples, TimeGrid, feedback_wellposed_check

TRUNCATION = 1e-14
CONVERGENCE = 5e-3
INSTABILITY = 1e8


@dataclass(frozen=True)
class SectorProfile:
    """Power profile ``h(sigma) = scale * sigma**beta`` with exponents ``s`` and ``p``."""

    scale: float = 1.0
    beta: float = 1.0
    s: float = 1.5
    p: float = 2.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValidationError("profile scale must be positive")
        if self.beta < 1:
            raise ValidationError("beta >= 1 is needed for a convex profile with h(0) = 0")
        if not self.s > 1 or not self.p > 1:
            raise BadExponent("s and p must exceed 1")
        if not self.beta * (self.s - 1) < 1:
            raise ValidationError("int_0^1 h^(1-s) diverges unless beta (s - 1) < 1")

    @property
    def q(self) -> float:
        return self.p * self.s / (self.s - 1)

    def h(self, sigma):
        return self.scale * np.asarray(sigma, dtype=float) ** self.beta


class ExpPolyKernel:
    """``k(z) = sum c z^m exp(-a z)``; like terms are merged on construction."""

    def __init__(self, terms):
        merged: dict[tuple[complex, int], complex] = {}
        for c, m, a in terms:
            m = int(m)
            a = complex(a)
            if m < 0:
                raise KernelNotAdmissible("monomial degrees must be nonnegative")
            if not a.real > 0:
                raise KernelNotAdmissible(f"Re a = {a.real} must be positive")
            merged[(a, m)] = merged.get((a, m), 0j) + complex(c)
        self.terms = [(c, m, a) for (a, m), c in sorted(
            merged.items(), key=lambda kv: (kv[0][0].real, kv[0][0].imag, kv[0][1]))]

    @classmethod
    def exponential(cls, a: complex = 1.0, c: complex = 1.0) -> "ExpPolyKernel":
        return cls([(c, 0, a)])

    def __repr__(self):
        return f"ExpPolyKernel({self.terms!r})"

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        out = np.zeros_like(z)
        for c, m, a in self.terms:
            out = out + c * z**m * np.exp(-a * z)
        return out

    def scaled(self, factor: complex) -> "ExpPolyKernel":
        return ExpPolyKernel([(factor * c, m, a) for c, m, a in self.terms])

    def is_zero(self) -> bool:
        return all(c == 0 for c, _, _ in self.terms)

    def basis(self) -> list[tuple[complex, int]]:
        """``(a, m)`` pairs spanning the shift-invariant family."""
        top: dict[complex, int] = {}
        for _, m, a in self.terms:
            top[a] = max(top.get(a, 0), m)
        return [(a, m) for a in sorted(top, key=lambda a: (a.real, a.imag))
                for m in range(top[a] + 1)]

    def coefficients(self, basis=None) -> np.ndarray:
        basis = self.basis() if basis is None else basis
        index = {b: i for i, b in enumerate(basis)}
        out = np.zeros(len(basis), dtype=np.complex128)
        for c, m, a in self.terms:
            out[index[(a, m)]] += c
        return out

    def to_config(self) -> list[list]:
        def num(z):
            z = complex(z)
            return z.real if z.imag == 0 else [z.real, z.imag]

        return [[num(c), m, num(a)] for c, m, a in self.terms]


def shift_apply(k: ExpPolyKernel, t: float) -> ExpPolyKernel:
    """``(S(t) k)(z) = k(z + t)`` via binomial re-expansion."""
    if t < 0:
        raise ValidationError("shift must be nonnegative")
    terms = []
    for c, m, a in k.terms:
        damp = c * np.exp(-a * t)
        for j in range(m + 1):
            terms.append((damp * comb(m, j) * t ** (m - j), j, a))
    return ExpPolyKernel(terms)


def derivative_block(basis) -> np.ndarray:
    """Matrix of ``d/dz`` on coefficient vectors over ``basis``."""
    index = {b: i for i, b in enumerate(basis)}
    D = np.zeros((len(basis), len(basis)), dtype=np.complex128)
    for (a, m), i in index.items():
        D[i, i] = -a
        if (a, m + 1) in index:
            D[i, index[(a, m + 1)]] = m + 1
    return D


def evaluation_row(basis) -> np.ndarray:
    """``delta_0`` on coefficient vectors: 1 for ``m = 0`` basis functions."""
    return np.array([1.0 if m == 0 else 0.0 for _, m in basis], dtype=np.complex128)


# Bergman norm ---------------------------------------------------------------

def _decay_rate(basis, profile: SectorProfile) -> float:
    rates = []
    for a, _ in basis:
        if profile.beta > 1 and a.imag != 0:
            return -np.inf
        slope = profile.scale if profile.beta == 1 else 0.0
        rates.append(a.real - abs(a.imag) * slope)
    return min(rates)


def _sigma_cutoff(rate: float, m_max: int) -> float:
    sigma = 1.0
    while np.exp(-rate * sigma) * max(sigma, 1.0) ** m_max >= TRUNCATION:
        sigma *= 1.25
    return sigma


def _sector_rule(profile: SectorProfile, sigma_max: float, points: int):
    """Tensor Gauss-Legendre nodes ``z`` and weights over the truncated sector."""
    xg, wg = np.polynomial.legendre.leggauss(points)
    # two panels in sigma resolve the boundary layer near the vertex
    split = min(1.0, sigma_max / 4)
    sig, wsig = [], []
    for lo, hi in ((0.0, split), (split, sigma_max)):
        sig.append(0.5 * (hi - lo) * (xg + 1) + lo)
        wsig.append(0.5 * (hi - lo) * wg)
    sig = np.concatenate(sig)
    wsig = np.concatenate(wsig)
    half = profile.h(sig)
    tau = xg[None, :] * half[:, None]
    w = wsig[:, None] * wg[None, :] * half[:, None]
    z = sig[:, None] + 1j * tau
    return z.ravel(), w.ravel()


def _basis_values(basis, z) -> np.ndarray:
    return np.stack([z**m * np.exp(-a * z) for a, m in basis], axis=1)


def _bergman_from_values(norms: np.ndarray, w: np.ndarray, q: float) -> np.ndarray:
    return (w @ norms**q) ** (1.0 / q)


def bergman_norm(k: ExpPolyKernel, profile: SectorProfile, quad_points: int = 48) -> float:
    """``(int int_sector |k|^q)^(1/q)`` by tensor Gauss-Legendre quadrature.

    Raises KernelNotAdmissible when ``k`` grows inside the sector and
    QuadratureNotConverged when doubling the rule moves the value by more
    than 0.5%.
    """
    if quad_points < 32:
        raise ValidationError("quad_points must be at least 32")
    if k.is_zero():
        return 0.0
    basis = k.basis()
    coeffs = k.coefficients(basis)[:, None]
    return float(bergman_norm_vector(basis, coeffs, profile, quad_points)[0])


def bergman_norm_vector(basis, coeffs, profile: SectorProfile, quad_points: int = 48) -> np.ndarray:
    """Bergman q-norms of X-valued functions ``sum_j coeffs[j] phi_j``.

    ``coeffs`` has shape ``(d, n)`` or ``(d, n, S)`` for ``S`` functions.
    """
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.ndim == 2:
        coeffs = coeffs[:, :, None]
    rate = _decay_rate(basis, profile)
    if not rate > 0:
        raise KernelNotAdmissible("kernel is not in the Bergman space of this sector")
    m_max = max(m for _, m in basis)
    sigma_max = _sigma_cutoff(rate, m_max)
    # |f(z)|^2 = sum_{d,e} conj(phi_d) phi_e <c_d, c_e>, so only d x d Gram matrices are needed
    gram = np.einsum("dns,ens->des", coeffs.conj(), coeffs)
    values = []
    for pts in (quad_points, 2 * quad_points):
        z, w = _sector_rule(profile, sigma_max, pts)
        phi = _basis_values(basis, z)                     # (Q, d)
        sq = np.einsum("qd,qe,des->qs", phi.conj(), phi, gram).real
        values.append(_bergman_from_values(np.sqrt(np.maximum(sq, 0.0)), w, profile.q))
    coarse, fine = values
    scale = np.maximum(np.abs(fine), 1e-300)
    if np.any(np.abs(fine - coarse) > CONVERGENCE * scale):
        raise QuadratureNotConverged("Bergman quadrature moved by more than 0.5% under refinement")
    return fine


# product system ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProductSystem:
    """Block pair ``(A_mat, P_mat)`` on ``X x span{z^m exp(-a z)} (x) X``.

    State layout: ``[x, c_0, c_1, ...]`` where ``c_j`` is the X-valued
    coefficient of the j-th basis function.
    """

    Acl: Generator
    P: np.ndarray
    kernel: ExpPolyKernel
    profile: SectorProfile
    basis: list
    A_mat: np.ndarray
    P_mat: np.ndarray

    @property
    def n(self) -> int:
        return self.Acl.dim

    @property
    def d(self) -> int:
        return len(self.basis)

    @property
    def D_block(self) -> np.ndarray:
        return derivative_block(self.basis)

    @property
    def full(self) -> np.ndarray:
        return self.A_mat + self.P_mat

    def split(self, z):
        z = np.asarray(z)
        return z[: self.n], z[self.n:].reshape(self.d, self.n, *z.shape[1:])


def _assemble(Acl: Generator, P, kernel: ExpPolyKernel, profile: SectorProfile) -> ProductSystem:
    n = Acl.dim
    P = np.atleast_2d(np.asarray(P, dtype=np.complex128))
    basis = kernel.basis()
    d = len(basis)
    eye = np.eye(n)
    A_mat = np.zeros((n * (d + 1), n * (d + 1)), dtype=np.complex128)
    A_mat[:n, :n] = Acl.matrix
    A_mat[n:, n:] = np.kron(derivative_block(basis), eye)
    P_mat = np.zeros_like(A_mat)
    P_mat[:n, n:] = np.kron(evaluation_row(basis)[None, :], eye)
    P_mat[n:, :n] = np.kron(kernel.coefficients(basis)[:, None], P)
    return ProductSystem(Acl, P, kernel, profile, basis, A_mat, P_mat)


def assemble_product_system(triple: BoundaryTriple, k: ExpPolyKernel,
                            profile: SectorProfile | None = None,
                            *, check_grid: TimeGrid | None = None) -> ProductSystem:
    """Block generator pair for the boundary Volterra equation of ``triple``."""
    profile = profile or SectorProfile()
    report = feedback_wellposed_check(triple, check_grid or TimeGrid(1.0, 200))
    if not report.wellposed:
        raise FeedbackSingular("identity feedback is not admissible on the check grid")
    return _assemble(perturbed_generator(triple), triple.P, k, profile)


def product_system_from_generator(Acl, P, k: ExpPolyKernel,
                                  profile: SectorProfile | None = None) -> ProductSystem:
    """Same block pair for an explicitly given closed-loop generator."""
    if not isinstance(Acl, Generator):
        Acl = Generator(Acl, "closed-loop")
    return _assemble(Acl, P, k, profile or SectorProfile())


def shift_via_block(k: ExpPolyKernel, t: float) -> np.ndarray:
    """Coefficients of ``S(t) k`` computed as ``exp(t D) coeffs(k)``."""
    basis = k.basis()
    return matrix_exponential(derivative_block(basis), t) @ k.coefficients(basis)


@dataclass
class MiyaderaEstimate:
    alpha: float
    constant: float
    theta: float
    small: bool
    delta_part: float
    kernel_part: float


def miyadera_admissibility(system: ProductSystem, alpha: float, p: float, grid: TimeGrid | None = None,
                           *, samples: int = 200, seed: int = 0, quad_points: int = 48) -> MiyaderaEstimate:
    """Sampled best constant in ``int_0^alpha |P T(t) z|^p dt <= theta |z|^p``.

    ``|(x, f)| = |x| + |f|_Bergman``.  ``constant`` is ``theta^(1/p)``; the two
    partial constants isolate the ``delta_0`` and ``k P`` blocks.
    """
    if not p > 1:
        raise BadExponent(f"p must exceed 1, got {p}")
    grid = grid or TimeGrid(alpha, 200)
    if not np.isclose(grid.t_max, alpha):
        raise ValidationError("grid.t_max must equal alpha")
    n, d = system.n, system.d
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, samples)) + 1j * rng.standard_normal((n, samples))
    c = rng.standard_normal((d, n, samples)) + 1j * rng.standard_normal((d, n, samples))
    # pure-x and pure-f candidates
    x[:, :2] = 0.0
    c[:, :, 2:4] = 0.0
    fnorm = bergman_norm_vector(system.basis, c, system.profile, quad_points)
    total = np.linalg.norm(x, axis=0) + fnorm
    x = x / total
    c = c / total
    knorm = bergman_norm(system.kernel, system.profile, quad_points) if not system.kernel.is_zero() else 0.0

    w = grid.trapezoid_weights()
    E_x = matrix_exponential(system.Acl.matrix, grid.dt)
    E_f = matrix_exponential(system.D_block, grid.dt)
    row = evaluation_row(system.basis)
    P = system.P
    xs = x.astype(np.complex128)
    cs = c.astype(np.complex128)
    delta_vals = np.empty((grid.steps + 1, samples))
    kern_vals = np.empty((grid.steps + 1, samples))
    for i in range(grid.steps + 1):
        delta_vals[i] = np.linalg.norm(np.einsum("d,dns->ns", row, cs), axis=0)
        kern_vals[i] = knorm * np.linalg.norm(P @ xs, axis=0)
        xs = E_x @ xs
        cs = np.einsum("ed,dns->ens", E_f, cs)
    theta_all = w @ (delta_vals + kern_vals) ** p
    theta = float(np.max(theta_all))
    return MiyaderaEstimate(
        alpha=float(alpha),
        constant=theta ** (1.0 / p),
        theta=theta,
        small=theta < 1.0,
        delta_part=float(np.max(w @ delta_vals**p)) ** (1.0 / p),
        kernel_part=float(np.max(w @ kern_vals**p)) ** (1.0 / p),
    )


# solvers --------------------------------------------------------------------

def solve_volterra_direct(triple_or_generator, k: ExpPolyKernel, x0, grid: TimeGrid,
                          *, P=None) -> SignalSamples:
    """Implicit Euler in ``A_cl`` with an explicit trapezoid convolution."""
    if isinstance(triple_or_generator, BoundaryTriple):
        Acl = perturbed_generator(triple_or_generator).matrix
        P = triple_or_generator.P if P is None else P
    else:
        Acl = getattr(triple_or_generator, "matrix", triple_or_generator)
        Acl = np.atleast_2d(np.asarray(Acl, dtype=np.complex128))
        if P is None:
            raise ValidationError("P is required when passing a generator")
    P = np.atleast_2d(np.asarray(P, dtype=np.complex128))
    x0 = np.asarray(x0, dtype=np.complex128).reshape(-1)
    if not np.all(np.isfinite(x0)):
        raise ValidationError("x0 must be finite")
    n = Acl.shape[0]
    N = grid.steps + 1
    dt = grid.dt
    kvals = k(grid.times)                     # k(t_j - t_i) = kvals[j - i]
    step = np.eye(n) - dt * Acl
    out = np.empty((N, n), dtype=np.complex128)
    Px = np.empty((N, n), dtype=np.complex128)
    out[0] = x0
    Px[0] = P @ x0
    for j in range(N - 1):
        if j == 0:
            conv = np.zeros(n, dtype=np.complex128)
        else:
            w = np.full(j + 1, dt)
            w[[0, -1]] *= 0.5
            conv = (w * kvals[j::-1]) @ Px[: j + 1]
        out[j + 1] = solve_linear(step, out[j] + dt * conv)
        Px[j + 1] = P @ out[j + 1]
        if np.linalg.norm(out[j + 1]) > INSTABILITY:
            raise StepUnstable(f"state norm exceeded {INSTABILITY:g} at t={grid.times[j + 1]:.4g}")
    return SignalSamples(grid, out)


def solve_volterra_product(system: ProductSystem, x0, grid: TimeGrid) -> SignalSamples:
    """x-component of ``exp(t (A_mat + P_mat)) (x0, 0)``."""
    n = system.n
    z = np.zeros(system.full.shape[0], dtype=np.complex128)
    z[:n] = np.asarray(x0, dtype=np.complex128).reshape(-1)
    E = matrix_exponential(system.full, grid.dt)
    out = np.empty((grid.steps + 1, n), dtype=np.complex128)
    for i in range(grid.steps + 1):
        out[i] = z[:n]
        z = E @ z
    return SignalSamples(grid, out)


def scalar_reduction_exact(times, x0: float = 1.0) -> np.ndarray:
    """``x' = -x + int e^{-(t-s)} x(s) ds`` via the augmented system
    ``(x, y)' = (-x + y, x - y)``."""
    from scipy.linalg import expm

    aug = np.array([[-1.0, 1.0], [1.0, -1.0]])
    return np.array([(expm(t * aug) @ np.array([x0, 0.0]))[0] for t in np.asarray(times)])


@dataclass
class VolterraRegularity:
    t_list: np.ndarray
    h_list: np.ndarray
    modulus_full: np.ndarray   # (len(t_list), len(h_list))
    modulus_diag: np.ndarray
    pazy_full: float
    pazy_diag: float
    mu: float


def _modulus(matrix, t_list, h_list):
    out = np.empty((len(t_list), len(h_list)))
    for i, t in enumerate(t_list):
        base = matrix_exponential(matrix, t)
        for j, h in enumerate(h_list):
            out[i, j] = operator_norm(matrix_exponential(matrix, t + h) - base)
    return out


def volterra_regularity_report(system: ProductSystem, t_list, h_list, *,
                               mu: float | None = None, tau_max: float = 1e3,
                               points: int = 41) -> VolterraRegularity:
    """Norm-continuity moduli and Pazy indices of ``A + P`` versus ``A``."""
    from .diagnostics import pazy_index

    t_list = np.asarray(t_list, dtype=float)
    h_list = np.asarray(h_list, dtype=float)
    full = Generator(system.full, "volterra-full")
    diag = Generator(system.A_mat, "volterra-diagonal")
    if mu is None:
        mu = max(full.growth_bound, diag.growth_bound) + 1.0
    return VolterraRegularity(
        t_list, h_list,
        _modulus(system.full, t_list, h_list),
        _modulus(system.A_mat, t_list, h_list),
        pazy_index(full, mu, tau_max, points),
        pazy_index(diag, mu, tau_max, points),
        float(mu),
    )
