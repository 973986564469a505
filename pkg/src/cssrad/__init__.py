"""Numerical laboratory for the radial Chern-Simons-Schrodinger system."""

__version__ = "0.1.0"

from ._backend import backend_name
from .radial import (
    RadialField,
    RadialGrid,
    SpectralTransform,
    free_evolve,
    free_propagate,
    integrate,
    l2_norm,
    lp_norm,
    radial_derivative,
    sobolev_norm,
    spectral_transform,
)

__all__ = [
    "RadialField",
    "RadialGrid",
    "SpectralTransform",
    "__version__",
    "backend_name",
    "free_evolve",
    "free_propagate",
    "integrate",
    "l2_norm",
    "lp_norm",
    "radial_derivative",
    "sobolev_norm",
    "spectral_transform",
]
