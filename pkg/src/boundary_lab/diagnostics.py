"""Regularity test battery for generators and their boundary perturbations.

Every infinite-dimensional notion is replaced by an explicit finite surrogate:
limsup over frequencies becomes a maximum over the top decade of a log-spaced
grid, suprema over L^p unit balls are sampled with a fixed seed, and
compactness is read off from singular-value decay.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .boundary import (
    BoundaryTriple,
    Generator,
    perturbed_generator,
    perturbed_resolvent,
    resolvent,
    restrict_generator,
)
from .errors import (
    BadExponent,
    GridMismatch,
    GridTooShort,
    MuBelowGrowthBound,
    NegativeTime,
    ValidationError,
)
from .linalg import eig_hermitian, operator_norm, singular_values, solve_linear
from .semigroup import TimeGrid, _col, _matrix, semigroup_at

ZERO_CLASS_FACTOR = 0.1
RANK_TOL = 1e-8
DEFAULT_SAMPLES = 200


@dataclass
class AdmissibilityReport:
    p: float
    tau_grid: np.ndarray
    gamma: np.ndarray
    c: np.ndarray
    zero_class_flag: bool = field(init=False)

    def __post_init__(self):
        self.zero_class_flag = bool(
            zero_class(self.tau_grid, self.gamma) and zero_class(self.tau_grid, self.c))

    def rows(self):
        for t, g, c in zip(self.tau_grid, self.gamma, self.c):
            yield {"tau": float(t), "gamma": float(g), "c": float(c)}


def zero_class(tau_grid, values) -> bool:
    """``values(first) < 0.1 values(last)`` over a range of at least 32x."""
    tau_grid = np.asarray(tau_grid)
    if tau_grid[0] > tau_grid[-1] / 32:
        return False
    return bool(values[0] < ZERO_CLASS_FACTOR * values[-1])


@dataclass
class ResolventScan:
    mu: float
    tau_grid: np.ndarray
    norms: np.ndarray
    pazy_values: np.ndarray
    pazy_index: float
    decay_flag: bool

    def rows(self):
        for t, r, pz in zip(self.tau_grid, self.norms, self.pazy_values):
            yield {"tau": float(t), "norm": float(r), "pazy": float(pz)}


@dataclass
class CompactnessProfile:
    t: float
    sv: np.ndarray
    decay_ratio: np.ndarray

    def rows(self):
        ratios = np.append(self.decay_ratio, np.nan)
        for k, (s, r) in enumerate(zip(self.sv, ratios)):
            yield {"k": k, "sv": float(s), "ratio": float(r)}


@dataclass
class DecayFit:
    slope: float
    intercept: float
    residual: float


@dataclass
class PerturbationDifference:
    semigroup_sv: np.ndarray
    h_list: np.ndarray
    modulus: np.ndarray
    resolvent_sv: np.ndarray
    rank: int


def _check_p(p: float) -> None:
    if not p > 1:
        raise BadExponent(f"p must exceed 1, got {p}")


def _trajectory(gen, grid: TimeGrid, x0: np.ndarray) -> np.ndarray:
    """``T(t_i) x0`` for all nodes; ``x0`` may hold several columns."""
    E = semigroup_at(gen, grid.dt)
    out = np.empty((grid.steps + 1,) + x0.shape, dtype=np.complex128)
    z = x0.astype(np.complex128)
    for k in range(grid.steps + 1):
        out[k] = z
        z = E @ z
    return out


def _unit_candidates(gen, samples: int, seed: int) -> np.ndarray:
    n = gen.dim if isinstance(gen, Generator) else _matrix(gen).shape[0]
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, samples)) + 1j * rng.standard_normal((n, samples))
    z /= np.linalg.norm(z, axis=0)
    try:
        a = _matrix(gen)
        _, v = np.linalg.eig(a)
        v = v / np.linalg.norm(v, axis=0)
        z = np.hstack([z, v])
    except np.linalg.LinAlgError:  # pragma: no cover
        pass
    return z


def admissibility_observation(gen, C, tau: float, p: float, grid: TimeGrid,
                              *, samples: int = DEFAULT_SAMPLES, seed: int = 0) -> float:
    """Best discrete constant gamma(tau) in ``int_0^tau |C T(s) x|^p <= gamma^p |x|^p``."""
    _check_p(p)
    if not np.isclose(tau, grid.t_max):
        raise GridMismatch("tau must equal grid.t_max")
    c = np.atleast_2d(np.asarray(C, dtype=np.complex128))
    if not np.any(c):
        return 0.0
    w = grid.trapezoid_weights()
    n = c.shape[1]
    if p == 2:
        # Gram matrix sum_i w_i T(s_i)* C* C T(s_i)
        traj = _trajectory(gen, grid, np.eye(n))       # (N, n, n)
        obs = np.einsum("ij,kjl->kil", c, traj)        # (N, m, n)
        gram = np.einsum("k,kil,kim->lm", w, obs.conj(), obs)
        top = eig_hermitian(0.5 * (gram + gram.conj().T)).eigenvalues[-1]
        return float(np.sqrt(max(top, 0.0)))
    x = _unit_candidates(gen, samples, seed)
    traj = _trajectory(gen, grid, x)                   # (N, n, S)
    y = np.linalg.norm(np.einsum("ij,kjs->kis", c, traj), axis=1)  # (N, S)
    vals = (w @ y**p) ** (1.0 / p)
    return float(np.max(vals))


def _control_matrix(gen, B, grid: TimeGrid) -> np.ndarray:
    """Columns ``T(tau - s_i) B`` for every node ``s_i``."""
    b = _col(B)
    traj = _trajectory(gen, grid, b)  # T(k dt) b
    return traj[::-1].T               # column i -> T((N - i) dt) b


def admissibility_control(gen, B, tau: float, p: float, grid: TimeGrid,
                          *, samples: int = DEFAULT_SAMPLES, seed: int = 0) -> float:
    """Best discrete constant c(tau) in ``|Phi_tau u| <= c(tau) |u|_p``."""
    _check_p(p)
    if not np.isclose(tau, grid.t_max):
        raise GridMismatch("tau must equal grid.t_max")
    if not np.any(np.asarray(B)):
        return 0.0
    w = grid.trapezoid_weights()
    K = _control_matrix(gen, B, grid) * w  # Phi u = K u
    if p == 2:
        return operator_norm(K / np.sqrt(w))
    # dual formulation: sup_{|y|=1} |(K* y)_i / w_i|_{L^q}, q the conjugate exponent
    q = p / (p - 1.0)
    rng = np.random.default_rng(seed)
    n = K.shape[0]
    y = rng.standard_normal((n, samples)) + 1j * rng.standard_normal((n, samples))
    y = np.hstack([y, np.linalg.svd(K / np.sqrt(w), full_matrices=False)[0]])
    y /= np.linalg.norm(y, axis=0)
    g = np.abs(K.conj().T @ y) / w[:, None]
    return float(np.max((w @ g**q) ** (1.0 / q)))


def admissibility_scan(gen, B, C, tau_grid, p: float = 2.0, steps_per_tau: int = 200,
                       *, seed: int = 0) -> AdmissibilityReport:
    """gamma(tau) and c(tau) over an increasing tau grid."""
    tau_grid = np.asarray(tau_grid, dtype=float)
    if np.any(np.diff(tau_grid) <= 0):
        raise ValidationError("tau_grid must be increasing")
    gamma, cc = [], []
    for tau in tau_grid:
        grid = TimeGrid(float(tau), steps_per_tau)
        gamma.append(admissibility_observation(gen, C, tau, p, grid, seed=seed))
        cc.append(admissibility_control(gen, B, tau, p, grid, seed=seed))
    return AdmissibilityReport(p, tau_grid, np.array(gamma), np.array(cc))


def resolvent_decay_fit(gen, omega: float, lambda_grid, *, B=None, C=None) -> DecayFit:
    """Least-squares slope of ``log |R(lam) B|`` (or ``|C R(lam)|``) vs ``log(lam - omega)``."""
    if (B is None) == (C is None):
        raise ValidationError("pass exactly one of B or C")
    lam = np.asarray(lambda_grid, dtype=float)
    if lam.size < 4:
        raise GridTooShort("need at least 4 lambda values")
    if np.any(lam <= omega + 1):
        raise ValidationError("all lambda must exceed omega + 1")
    a = _matrix(gen)
    n = a.shape[0]
    norms = []
    for l in lam:
        if B is not None:
            v = solve_linear(l * np.eye(n) - a, _col(B))
        else:
            v = solve_linear((l * np.eye(n) - a).conj().T, _col(C).conj())
        norms.append(np.linalg.norm(v))
    xs, ys = np.log(lam - omega), np.log(norms)
    (slope, intercept), res, *_ = np.polyfit(xs, ys, 1, full=True)
    return DecayFit(float(slope), float(intercept), float(res[0]) if len(res) else 0.0)


def resolvent_norm(gen, z: complex) -> float:
    """``|R(z, A)|`` from the singular values of ``z - A``."""
    if isinstance(gen, Generator) and gen.is_diagonal:
        return float(1.0 / np.min(np.abs(z - gen.diagonal)))
    a = _matrix(gen)
    smin = singular_values(z * np.eye(a.shape[0]) - a)[-1]
    return float(np.inf if smin == 0 else 1.0 / smin)


def _check_mu(gen, mu: float) -> None:
    growth = gen.growth_bound if isinstance(gen, Generator) else np.max(np.linalg.eigvals(_matrix(gen)).real)
    if not mu > growth:
        raise MuBelowGrowthBound(f"mu={mu} does not exceed the growth bound {growth:.6g}")


def norm_continuity_scan(gen, mu: float, tau_max: float, points: int = 61) -> ResolventScan:
    """Resolvent norms along ``mu + i tau`` for log-spaced ``tau`` in ``[1, tau_max]``."""
    _check_mu(gen, mu)
    tau = np.logspace(0.0, np.log10(tau_max), points)
    norms = np.array([resolvent_norm(gen, mu + 1j * t) for t in tau])
    pazy = np.log(tau) * norms
    top = tau >= tau_max / 10.0
    return ResolventScan(mu, tau, norms, pazy, float(np.max(pazy[top])),
                         bool(norms[-1] < 0.05 * norms[0]))


def pazy_index(gen, mu: float, tau_max: float, points: int = 61) -> float:
    """Finite-grid surrogate of ``limsup log|tau| |R(mu + i tau)|``: the
    maximum over the top decade of the scan."""
    return norm_continuity_scan(gen, mu, tau_max, points).pazy_index


def skew_generator(n: int) -> Generator:
    """``diag(i k)``, ``k = 1..n``: a unitary group, never norm continuous."""
    return Generator.from_diagonal(1j * np.arange(1, n + 1), "skew-diagonal")


def riesz_condition_probe(gen, tau: float, p: float, grid: TimeGrid, h_list,
                          samples: int = 50, seed: int = 0) -> np.ndarray:
    """Sampled sup of ``int_0^tau |(Kf)(t+h) - (Kf)(t)|^p dt`` over ``|f|_p <= 1``.

    ``f`` is state-valued and given by its grid samples; ``(Kf)(t) =
    int_0^t T(t-s) f(s) ds`` by the trapezoid rule, with ``f = 0`` past
    ``tau``.  Each ``h`` is rounded to a whole number of steps.
    """
    _check_p(p)
    if samples < 10:
        raise ValidationError("samples must be at least 10")
    if not np.isclose(tau, grid.t_max):
        raise GridMismatch("tau must equal grid.t_max")
    h_list = np.asarray(h_list, dtype=float)
    if np.any(h_list <= 0) or np.any(h_list >= tau):
        raise ValidationError("h_list must lie in (0, tau)")
    shifts = np.rint(h_list / grid.dt).astype(int)
    if np.any(shifts < 1):
        raise ValidationError("h below the grid resolution")
    a = _matrix(gen)
    n = a.shape[0]
    N = grid.steps + 1
    total = N + int(shifts.max())
    wts = grid.trapezoid_weights()

    rng = np.random.default_rng(seed)
    f = rng.standard_normal((N, n, samples))
    # deterministic candidates: eigenvector-aligned steps on the first/second half
    try:
        vals, vecs = np.linalg.eig(a)
        vecs = vecs[:, np.argsort(-vals.real, kind="stable")]
    except np.linalg.LinAlgError:  # pragma: no cover
        vecs = np.eye(n)
    picks = sorted({0, 1, 2, n // 2, n - 1} & set(range(n)))
    steps = []
    for j in picks:
        for lo, hi in ((0, N // 2), (N // 2, N), (0, N)):
            s = np.zeros((N, n), dtype=np.complex128)
            s[lo:hi] = vecs[:, j]
            steps.append(s)
    f = np.concatenate([f.astype(np.complex128), np.stack(steps, axis=2)], axis=2)
    # normalise in L^p(0, tau; X)
    fn = np.linalg.norm(f, axis=1)
    f /= ((wts @ fn**p) ** (1.0 / p))[None, None, :]

    fpad = np.zeros((total, n, f.shape[2]), dtype=np.complex128)
    fpad[:N] = f
    E = semigroup_at(gen, grid.dt)
    dt = grid.dt
    Kf = np.zeros_like(fpad)
    acc = fpad[0].copy()
    first = fpad[0].copy()
    for k in range(1, total):
        acc = E @ acc + fpad[k]
        first = E @ first
        Kf[k] = dt * (acc - 0.5 * first - 0.5 * fpad[k])
    out = []
    for m in shifts:
        diff = np.linalg.norm(Kf[m:m + N] - Kf[:N], axis=1)  # (N, S)
        out.append(float(np.max(wts @ diff**p)))
    return np.array(out)


def compactness_profile(gen, t: float) -> CompactnessProfile:
    """Singular values of ``T(t)`` and their successive ratios."""
    if not t > 0:
        raise NegativeTime("t must be positive")
    sv = singular_values(semigroup_at(gen, t))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(sv[:-1] > 0, sv[1:] / sv[:-1], 0.0)
    return CompactnessProfile(float(t), sv, ratio)


def numerical_rank(sv, tol: float = RANK_TOL) -> int:
    sv = np.asarray(sv)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def perturbation_difference_report(triple: BoundaryTriple, t: float, lam: complex,
                                   h_list) -> PerturbationDifference:
    """Structure of ``T_cl - T`` and ``R(lam, A_cl) - R(lam, A)``."""
    if not t > 0:
        raise NegativeTime("t must be positive")
    A, Acl = restrict_generator(triple), perturbed_generator(triple)
    h_list = np.asarray(h_list, dtype=float)

    def diff(s):
        return semigroup_at(Acl, s) - semigroup_at(A, s)

    base = diff(t)
    modulus = np.array([operator_norm(diff(t + h) - base) for h in h_list])
    rdiff = perturbed_resolvent(triple, lam) - resolvent(A, lam)
    rsv = singular_values(rdiff)
    scale = operator_norm(resolvent(A, lam))
    rank = int(np.sum(rsv > RANK_TOL * scale))
    return PerturbationDifference(singular_values(base), h_list, modulus, rsv, rank)


def write_rows(path, rows) -> Path:
    """CSV with a header row taken from the first record."""
    path = Path(path)
    rows = list(rows)
    with path.open("w", newline="") as fh:
        if rows:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            for r in rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return path


def to_jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "__dataclass_fields__"):
        return to_jsonable(asdict(obj))
    return obj


def dump_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path
