"""Exception types raised across the package."""


class SquintLocError(Exception):
    """Base class for all package errors."""


class ConfigError(SquintLocError, ValueError):
    """Invalid system, scenario or campaign configuration."""


class InfeasibleSquint(SquintLocError, ValueError):
    """The squinted focal point has no real solution (|sin| > 1)."""


class InfeasibleTrajectory(SquintLocError, ValueError):
    """A trajectory point leaves the visible region or has non-positive range."""


class TooFewPeaks(SquintLocError, RuntimeError):
    """The power spectrum holds fewer local maxima than requested users."""


class InvalidSubarray(SquintLocError, ValueError):
    """Spatial smoothing subarray size out of range."""


class DecompositionFailure(SquintLocError, RuntimeError):
    """Eigendecomposition did not converge or produced non-finite output."""


class WindowExhausted(SquintLocError, RuntimeError):
    """Refinement could not find a peak interior to the search window."""


class DegenerateGeometry(SquintLocError, ValueError):
    """Fisher information matrix is singular for the given geometry."""
