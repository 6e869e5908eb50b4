"""Semigroups, input/output maps and the closed-loop consistency checks.

All time convolutions use the composite trapezoid rule on a uniform grid.
Powers ``T(dt)^k`` are accumulated by Horner recursion, so an output sample at
``t_k`` only ever touches input samples ``u_0 .. u_k``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .boundary import (
    BoundaryTriple,
    Generator,
    _check_resolvent_set,
    boundary_system,
    dirichlet_operator,
    perturbed_generator,
    restrict_generator,
)
from .errors import FeedbackSingular, GridMismatch, NegativeTime, ValidationError
from .linalg import as_matrix, matrix_exponential, operator_norm, solve_linear

FEEDBACK_BOUND = 1e6


@dataclass(frozen=True)
class TimeGrid:
    t_max: float
    steps: int

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValidationError("t_max must be positive")
        if self.steps < 2:
            raise ValidationError("steps must be at least 2")

    @property
    def dt(self) -> float:
        return self.t_max / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.steps + 1)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.steps + 1, self.dt)
        w[[0, -1]] *= 0.5
        return w


@dataclass(frozen=True)
class SignalSamples:
    """Samples on a grid; ``values`` has shape ``(steps + 1,)`` or ``(steps + 1, channels)``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "values", v)
        if v.shape[0] != self.grid.steps + 1:
            raise GridMismatch(f"{v.shape[0]} samples for a grid of {self.grid.steps + 1} nodes")

    @classmethod
    def constant(cls, grid: TimeGrid, value: complex = 1.0) -> "SignalSamples":
        return cls(grid, np.full(grid.steps + 1, value, dtype=np.complex128))

    @classmethod
    def from_function(cls, grid: TimeGrid, fn) -> "SignalSamples":
        return cls(grid, np.asarray(fn(grid.times), dtype=np.complex128))

    @property
    def channels(self) -> np.ndarray:
        v = self.values
        return v[:, None] if v.ndim == 1 else v

    def to_csv(self, path) -> Path:
        path = Path(path)
        ch = self.channels
        header = ["t"]
        for j in range(ch.shape[1]):
            header += [f"re{j}", f"im{j}"]
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for t, row in zip(self.grid.times, ch):
                out = [repr(float(t))]
                for z in row:
                    out += [repr(float(z.real)), repr(float(z.imag))]
                writer.writerow(out)
        return path


@dataclass(frozen=True)
class TransferSample:
    lam: complex
    H: complex


@dataclass(frozen=True)
class FeedbackReport:
    inverse_norm: float
    F_norm: float
    wellposed: bool


def _matrix(gen) -> np.ndarray:
    return gen.matrix if isinstance(gen, Generator) else as_matrix(gen)


def _col(b) -> np.ndarray:
    return np.asarray(b, dtype=np.complex128).reshape(-1)


def semigroup_at(gen, t: float) -> np.ndarray:
    """``T(t) = exp(t A)``."""
    if t < 0:
        raise NegativeTime(f"t={t} < 0")
    if isinstance(gen, Generator) and gen.is_diagonal:
        return np.diag(np.exp(t * gen.diagonal))
    return matrix_exponential(_matrix(gen), t)


def _check_grid(u: SignalSamples, grid: TimeGrid | None = None):
    if grid is not None and u.grid != grid:
        raise GridMismatch("signal and grid differ")
    if u.values.ndim != 1:
        raise GridMismatch("expected a scalar-valued signal")


def _control_states(gen, B, u: SignalSamples) -> np.ndarray:
    """``Phi_{t_k} u`` for every node, shape ``(steps + 1, dim)``."""
    _check_grid(u)
    a = _matrix(gen)
    b = _col(B)
    if b.shape[0] != a.shape[0]:
        raise GridMismatch("B does not match the generator dimension")
    E = semigroup_at(gen, u.grid.dt)
    dt = u.grid.dt
    uv = u.values
    out = np.zeros((len(uv), a.shape[0]), dtype=np.complex128)
    acc = b * uv[0]     # sum_{i<=k} E^{k-i} b u_i
    first = b * uv[0]   # E^k b u_0
    for k in range(1, len(uv)):
        acc = E @ acc + b * uv[k]
        first = E @ first
        out[k] = dt * (acc - 0.5 * first - 0.5 * b * uv[k])
    return out


def control_map(gen, B, u: SignalSamples) -> np.ndarray:
    """``Phi_t u = int_0^t T(t - s) B u(s) ds`` at ``t = t_max``."""
    return _control_states(gen, B, u)[-1]


def observation_map(gen, C, x, grid: TimeGrid) -> SignalSamples:
    """Samples of ``C T(t_i) x``."""
    c = _col(C)
    x = _col(x)
    a = _matrix(gen)
    if c.shape[0] != a.shape[0] or x.shape[0] != a.shape[0]:
        raise GridMismatch("C or x does not match the generator dimension")
    E = semigroup_at(gen, grid.dt)
    y = np.empty(grid.steps + 1, dtype=np.complex128)
    z = x.copy()
    for k in range(grid.steps + 1):
        y[k] = c @ z
        z = E @ z
    return SignalSamples(grid, y)


def input_output_map(gen, B, C, u: SignalSamples, D: complex = 0.0) -> SignalSamples:
    """Samples of ``(F u)(t_i) = C Phi_{t_i} u + D u(t_i)``."""
    states = _control_states(gen, B, u)
    c = _col(C)
    return SignalSamples(u.grid, states @ c + D * u.values)


def markov_parameters(gen, B, C, grid: TimeGrid) -> np.ndarray:
    """``C T(k dt) B`` for ``k = 0..steps``."""
    return observation_map(gen, C, _col(B), grid).values


def io_matrix(gen, B, C, grid: TimeGrid, D: complex = 0.0) -> np.ndarray:
    """Lower-triangular matrix of :func:`input_output_map` on the grid."""
    hk = markov_parameters(gen, B, C, grid)
    N = grid.steps + 1
    dt = grid.dt
    k, i = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    F = np.where(k >= i, dt * hk[np.clip(k - i, 0, None)], 0.0).astype(np.complex128)
    F[:, 0] *= 0.5
    F[np.arange(N), np.arange(N)] *= 0.5
    F[0, 0] = 0.0
    F[np.arange(N), np.arange(N)] += D
    return F


def transfer_function(triple: BoundaryTriple, lam: complex) -> TransferSample:
    """``H(lam) = M D_lam``."""
    d = dirichlet_operator(triple, lam)
    return TransferSample(complex(lam), complex(triple.M @ d.lift))


def transfer_function_state_space(gen, B, C, lam: complex, D: complex = 0.0) -> complex:
    """``C R(lam, A) B + D``, the state-space route to the transfer function."""
    if isinstance(gen, Generator):
        _check_resolvent_set(gen, lam)
    a = _matrix(gen)
    x = solve_linear(lam * np.eye(a.shape[0]) - a, _col(B))
    return complex(_col(C) @ x + D)


def regularity_probe(triple: BoundaryTriple, v: complex, t_grid, steps: int = 400) -> dict:
    """Cesaro averages ``(1/t) int_0^t (F u0)`` for ``u0 = v`` and their linear
    extrapolation to ``t = 0``."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0) or np.any(np.diff(t_grid) >= 0):
        raise ValidationError("t_grid must be positive and decreasing")
    sys = boundary_system(triple)
    averages = []
    for t in t_grid:
        grid = TimeGrid(float(t), steps)
        y = input_output_map(sys.A, sys.B, sys.C, SignalSamples.constant(grid, v), sys.D)
        averages.append(complex(np.sum(grid.trapezoid_weights() * y.values) / t))
    averages = np.array(averages)
    if v == 0:
        limit = 0j
    else:
        coef_re = np.polyfit(t_grid, averages.real, 1)
        coef_im = np.polyfit(t_grid, averages.imag, 1)
        limit = complex(coef_re[1], coef_im[1])
    return {"t": t_grid, "averages": averages, "limit": limit, "feedthrough": sys.D * v}


def vcf_residual(triple: BoundaryTriple, t: float, grid: TimeGrid, form: str = "left") -> float:
    """Residual of the variation-of-constants formula for ``T_cl``.

    ``form="left"``:  ``T_cl(t) x = T(t) x + int T(t-s) B C_cl T_cl(s) x ds``;
    ``form="right"``: ``T_cl(t) x = T(t) x + int T_cl(t-s) B C_cl T(s) x ds``.
    Returns the maximum over standard basis vectors of the residual norm.
    """
    if t == 0:
        return 0.0
    if not np.isclose(t, grid.t_max):
        raise GridMismatch("t must equal grid.t_max")
    sys = boundary_system(triple)
    A, Acl = sys.A, perturbed_generator(triple)
    inner, outer = (Acl, A) if form == "left" else (A, Acl)
    n = A.dim
    E_in = semigroup_at(inner, grid.dt)
    E_out = semigroup_at(outer, grid.dt)
    w = np.ones(grid.steps + 1)
    w[[0, -1]] = 0.5
    states = np.eye(n, dtype=np.complex128)
    acc = np.zeros((n, n), dtype=np.complex128)
    for k in range(grid.steps + 1):
        acc = E_out @ acc + w[k] * np.outer(sys.B, sys.C_cl @ states)
        if k < grid.steps:
            states = E_in @ states
    # states == inner semigroup at t applied to the basis
    lhs = states if form == "left" else semigroup_at(Acl, t)
    res = lhs - semigroup_at(A, t) - grid.dt * acc
    return float(np.max(np.linalg.norm(res, axis=0)))


def feedback_wellposed_check(triple_or_system, grid: TimeGrid) -> FeedbackReport:
    """Norm of ``(I - F)^{-1}`` for the discretized input-output map."""
    if isinstance(triple_or_system, BoundaryTriple):
        s = boundary_system(triple_or_system)
        gen, B, C, D = s.A, s.B, s.C, s.D
    else:
        gen, B, C, D = triple_or_system
    F = io_matrix(gen, B, C, grid, D)
    N = F.shape[0]
    try:
        inv = solve_linear(np.eye(N) - F, np.eye(N, dtype=np.complex128))
    except Exception as exc:
        raise FeedbackSingular("I - F is singular on the grid") from exc
    norm = operator_norm(inv)
    return FeedbackReport(norm, operator_norm(F), bool(np.isfinite(norm) and norm < FEEDBACK_BOUND))


def laplace_transform(y: SignalSamples, lam: complex) -> complex:
    """Trapezoid Laplace transform of samples over the grid window."""
    w = y.grid.trapezoid_weights()
    return complex(np.sum(w * np.exp(-lam * y.grid.times) * y.values))
