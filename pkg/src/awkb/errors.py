"""Exception hierarchy shared by every module in the package."""


class AwkbError(Exception):
    """Base class for all package errors."""


class DomainError(AwkbError, ValueError):
    """Argument lies outside the valid domain of a model or window."""


class BracketError(AwkbError, ValueError):
    """A root bracket does not contain a sign change."""


class ConvergenceError(AwkbError, RuntimeError):
    """An iterative solver failed to reach its tolerance."""


class ToleranceError(AwkbError, RuntimeError):
    """Quadrature budget exhausted before the requested tolerance.

    The best available estimate is kept on ``estimate``.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class RegionError(AwkbError, ValueError):
    """Interval crosses between classically allowed and forbidden regions."""


class TurningPointProximityError(RegionError):
    """Grid point closer to a turning point than the configured standoff."""


class PathError(AwkbError, ValueError):
    """Contour path is malformed (e.g. not closed)."""


class SingularityError(AwkbError, RuntimeError):
    """Evaluation hit a turning point or the ODE step size underflowed."""


class TopologyError(AwkbError, ValueError):
    """Wrong number of turning points for the requested operation."""


class BranchError(AwkbError, RuntimeError):
    """Square-root branch could not be tracked continuously along a path."""


class DegenerateError(AwkbError, ValueError):
    """Normalization requested for a function with zero norm."""


class ConfigError(AwkbError, ValueError):
    """Invalid scenario configuration."""
