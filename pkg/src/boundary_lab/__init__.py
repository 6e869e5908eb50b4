"""Boundary-perturbed semigroups on finite-difference grids.

The main entry points are re-exported here; see the submodules for the full
set of diagnostics.
"""
from .boundary import (
    BoundaryTriple,
    Generator,
    build_heat_triple,
    dirichlet_operator,
    perturbed_generator,
    perturbed_resolvent,
    restrict_generator,
)
from .errors import BoundaryLabError, NumericalError, ValidationError
from .semigroup import TimeGrid, semigroup_at
from .volterra import ExpPolyKernel, SectorProfile

__version__ = "0.1.0"

__all__ = [
    "BoundaryTriple",
    "Generator",
    "build_heat_triple",
    "dirichlet_operator",
    "perturbed_generator",
    "perturbed_resolvent",
    "restrict_generator",
    "BoundaryLabError",
    "NumericalError",
    "ValidationError",
    "TimeGrid",
    "semigroup_at",
    "ExpPolyKernel",
    "SectorProfile",
]
