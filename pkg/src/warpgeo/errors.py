"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`WarpGeoError`
so callers (and the CLI) can map failures to exit codes.
"""


class WarpGeoError(Exception):
    """Base class for all package errors."""


class DomainError(WarpGeoError, ValueError):
    """A radius left the admissible interval of the warp function."""


class SingularMetricError(WarpGeoError):
    """The ambient metric lost positive definiteness."""


class DegenerateSurfaceError(WarpGeoError):
    """Induced metric is not positive definite somewhere."""


class NotStarShapedError(WarpGeoError):
    """Support function is not positive everywhere."""


class ConvexityError(WarpGeoError):
    """A principal curvature became non-positive."""


class ClosenessError(WarpGeoError):
    """Initial flow surface is too far from a round sphere (3C >= r^2)."""


class PositivityError(WarpGeoError):
    """Conformal factor u reached zero or below."""


class ConvergenceError(WarpGeoError):
    """Base for numerical non-convergence (CLI exit code 3)."""


class NoContractionError(ConvergenceError):
    """Picard iteration is not contracting."""


class StabilityError(ConvergenceError):
    """Semi-implicit solve failed to settle."""


class AmbiguousSpectrumError(ConvergenceError):
    """No singular-value gap large enough to count a kernel."""


class FitError(WarpGeoError):
    """Asymptotic least-squares fit is not trustworthy."""
