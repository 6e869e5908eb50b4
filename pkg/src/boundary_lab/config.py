"""Run manifests: a YAML mapping validated into a :class:`RunConfig`.

A manifest looks like::

    schema_version: 1
    scenario: full-report
    n: 100
    seed: 7
    output_dir: out/full
    kernel: [[1.0, 0, 1.0]]      # terms c * z**m * exp(-a z) as [c, m, a]

Every key other than ``scenario`` has a default.  Complex entries are written
as ``[re, im]`` pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

import yaml

from .errors import ConfigError, KernelNotAdmissible
from .volterra import ExpPolyKernel

SCHEMA_VERSION = 1

SCENARIOS = (
    "heat-example",
    "resolvent-scan",
    "admissibility",
    "riesz-probe",
    "compactness",
    "vcf-check",
    "volterra",
    "full-report",
)

# scenarios that draw random test vectors
SAMPLED = frozenset({"admissibility", "riesz-probe", "volterra", "full-report"})


def _number(value, key: str) -> complex:
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return complex(value[0], value[1])
    raise ConfigError(f"{key}: expected a number or an [re, im] pair, got {value!r}")


def _real_list(value, key: str, *, positive=False, increasing=False) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{key}: expected a non-empty list")
    out = []
    for v in value:
        z = _number(v, key)
        if z.imag != 0:
            raise ConfigError(f"{key}: entries must be real")
        out.append(z.real)
    if positive and min(out) <= 0:
        raise ConfigError(f"{key}: entries must be positive")
    if increasing and any(b <= a for a, b in zip(out, out[1:])):
        raise ConfigError(f"{key}: entries must be strictly increasing")
    return tuple(out)


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    n: int = 100
    p: float = 2.0
    seed: int | None = 0
    output_dir: Path = Path("boundary-lab-output")
    feedback_gain: float = 1.0
    coupling: float = 0.1
    lambdas: tuple[float, ...] = (0.0, 1.0, 4.0)
    resolvent_points: tuple[complex, ...] = (1.0, 2 + 3j, 10.0)
    eigen_count: int = 5
    tau_grid: tuple[float, ...] = (1 / 32, 1 / 16, 1 / 8, 1 / 4, 1 / 2, 1.0)
    steps_per_tau: int = 200
    decay_lambdas: tuple[float, ...] = (10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0)
    tau_max: float = 1e4
    scan_points: int = 61
    mu: float | None = None
    h_list: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    riesz_tau: float = 1.0
    riesz_steps: int = 400
    samples: int = 50
    t_final: float = 0.5
    steps: int = 400
    kernel: tuple[tuple[complex, int, complex], ...] = ((1.0, 0, 1.0),)
    volterra_n: int = 50
    volterra_t: float = 1.0
    emit_plots: bool = True

    def with_overrides(self, *, output_dir=None, seed=None) -> "RunConfig":
        cfg = self
        if output_dir is not None:
            cfg = replace(cfg, output_dir=Path(output_dir))
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        cfg.validate()
        return cfg

    def kernel_object(self) -> ExpPolyKernel:
        return ExpPolyKernel(self.kernel)

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {', '.join(SCENARIOS)}")
        if self.n < 8:
            raise ConfigError("n must be at least 8")
        if self.volterra_n < 8:
            raise ConfigError("volterra_n must be at least 8")
        if not self.p > 1:
            raise ConfigError("p must exceed 1")
        if self.scenario in SAMPLED and self.seed is None:
            raise ConfigError(f"scenario {self.scenario!r} samples test vectors and needs a seed")
        for name in ("steps", "steps_per_tau", "riesz_steps", "samples", "scan_points", "eigen_count"):
            if getattr(self, name) < 2:
                raise ConfigError(f"{name} must be at least 2")
        for name in ("t_final", "tau_max", "riesz_tau", "volterra_t"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if len(self.tau_grid) < 2:
            raise ConfigError("tau_grid needs at least two points")
        if len(self.decay_lambdas) < 4:
            raise ConfigError("decay_lambdas needs at least four points")
        try:
            self.kernel_object()
        except KernelNotAdmissible as exc:
            raise ConfigError(f"kernel: {exc}") from exc


_INT_KEYS = {"n", "eigen_count", "steps_per_tau", "scan_points", "riesz_steps", "samples",
             "steps", "volterra_n"}
_FLOAT_KEYS = {"p", "feedback_gain", "coupling", "tau_max", "riesz_tau", "t_final", "volterra_t"}


def _as_int(value, key):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    return value


def _as_float(value, key):
    z = _number(value, key)
    if z.imag != 0:
        raise ConfigError(f"{key}: expected a real number")
    return z.real


def _kernel_terms(value) -> tuple:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError("kernel: expected a non-empty list of [c, m, a] terms")
    terms = []
    for term in value:
        if not isinstance(term, (list, tuple)) or len(term) != 3:
            raise ConfigError(f"kernel: term {term!r} is not [c, m, a]")
        c, m, a = term
        terms.append((_number(c, "kernel"), _as_int(m, "kernel"), _number(a, "kernel")))
    return tuple(terms)


def parse_config(data) -> RunConfig:
    """Validate a decoded manifest mapping."""
    if not isinstance(data, dict):
        raise ConfigError("the manifest must be a mapping")
    data = dict(data)
    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}")
    if "scenario" not in data:
        raise ConfigError("missing required key 'scenario'")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")

    kw = {}
    for key, value in data.items():
        if key == "scenario":
            if not isinstance(value, str):
                raise ConfigError("scenario must be a string")
            kw[key] = value
        elif key in _INT_KEYS:
            kw[key] = _as_int(value, key)
        elif key in _FLOAT_KEYS:
            kw[key] = _as_float(value, key)
        elif key == "seed":
            kw[key] = None if value is None else _as_int(value, key)
        elif key == "mu":
            kw[key] = None if value is None else _as_float(value, key)
        elif key == "output_dir":
            if not isinstance(value, str) or not value:
                raise ConfigError("output_dir must be a non-empty string")
            kw[key] = Path(value)
        elif key == "emit_plots":
            if not isinstance(value, bool):
                raise ConfigError("emit_plots must be true or false")
            kw[key] = value
        elif key == "kernel":
            kw[key] = _kernel_terms(value)
        elif key == "resolvent_points":
            if not isinstance(value, (list, tuple)) or not value:
                raise ConfigError("resolvent_points: expected a non-empty list")
            kw[key] = tuple(_number(v, key) for v in value)
        elif key in ("tau_grid", "decay_lambdas"):
            kw[key] = _real_list(value, key, positive=True, increasing=True)
        elif key == "h_list":
            kw[key] = _real_list(value, key, positive=True)
        elif key == "lambdas":
            kw[key] = _real_list(value, key)
    cfg = RunConfig(**kw)
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from exc
    return parse_config(data)
