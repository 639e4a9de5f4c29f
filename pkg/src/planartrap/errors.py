"""Exception types shared across the package."""


class PlanarTrapError(Exception):
    """Base class for all package errors."""


class ValidationError(PlanarTrapError, ValueError):
    """Invalid geometry, drive, or configuration input."""


class UnsupportedLayoutError(ValidationError):
    """Operation requires the canonical five-electrode layout."""


class SolverConvergenceError(PlanarTrapError, RuntimeError):
    """Iterative field solve did not reach tolerance within the iteration cap."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NoTrapError(PlanarTrapError, RuntimeError):
    """Secular potential has no interior trapping minimum."""


class SaddleNotMinimumError(PlanarTrapError, RuntimeError):
    """Quadratic fit around the candidate minimum has a negative curvature."""


class BracketError(PlanarTrapError, RuntimeError):
    """Root bracket does not contain a sign change."""


class NormalizationError(PlanarTrapError, ValueError):
    """Normalized quantities are undefined (e.g. zero RF amplitude)."""


class InsufficientDataError(PlanarTrapError, ValueError):
    """Trajectory too short for the requested measurement."""
