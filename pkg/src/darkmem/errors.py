"""Exception types shared across the package."""


class DarkMemError(Exception):
    """Base class for all package errors."""


class MissingCalibrationError(DarkMemError, KeyError):
    """A (kind, precision) pair has no calibrated energy in the profile."""

    def __str__(self):
        return Exception.__str__(self)


class NonOperationalVoltageError(DarkMemError, ValueError):
    """Supply voltage at or below threshold, or above the allowed overdrive."""


class StructuralError(DarkMemError, ValueError):
    """Inputs that do not line up (e.g. traffic levels vs hierarchy levels)."""


class InfeasibleError(DarkMemError):
    """No design satisfies the constraints.

    ``reason`` is a short machine-readable tag (``"density"``, ``"area"``,
    ``"power"``, ``"demand"``).
    """

    def __init__(self, message, reason="infeasible"):
        super().__init__(message)
        self.reason = reason


class ConfigError(DarkMemError, ValueError):
    """Invalid run configuration."""
