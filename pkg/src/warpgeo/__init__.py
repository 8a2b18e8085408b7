"""Convex spheres in rotationally symmetric warped product spaces.

Modules
-------
metric      warp functions, ambient curvature and Euclidean-coordinate metric
grid        latitude/longitude grid, quadrature and derivative stencils
surface     induced metric, second fundamental form, Gauss-equation checks
profile     pointwise geometry of surfaces of revolution
nonrigid    fixed-point construction of isometric, non-congruent spheres
linearized  kernel of the linearized isometric-embedding operator
flow        outward geodesic flow and the monotone mass quantity
cli         ``warpgeo`` command-line front end
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AmbiguousSpectrumError,
    ConvergenceError,
    ConvexityError,
    DomainError,
    NoContractionError,
    StabilityError,
    WarpGeoError,
)
from .grid import SphereGrid  # noqa: E402
from .metric import WarpFunction, ambient_curvature, warp_eval  # noqa: E402

__all__ = [
    "__version__",
    "AmbiguousSpectrumError",
    "ConvergenceError",
    "ConvexityError",
    "DomainError",
    "NoContractionError",
    "StabilityError",
    "WarpGeoError",
    "SphereGrid",
    "WarpFunction",
    "ambient_curvature",
    "warp_eval",
]
