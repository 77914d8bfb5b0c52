"""Numerical laboratory for the prime geodesic theorem on PSL(2,Z) in square mean."""

from .errors import ComputeError, CoverageError, GeodesicLabError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "ComputeError",
    "CoverageError",
    "GeodesicLabError",
    "ValidationError",
    "__version__",
]
