"""Exception types shared across the package.

The CLI maps these onto exit codes: ``ConfigError`` -> 2, ``DomainError`` -> 3,
``ConvergenceError`` -> 4.
"""


class NVClockError(Exception):
    """Base class for all package errors."""


class ConfigError(NVClockError, ValueError):
    """Malformed or inconsistent scenario configuration."""


class DomainError(NVClockError, ValueError):
    """Input outside the validity range of a model."""


class NearGSLACError(DomainError):
    """State labels cannot be assigned reliably near a level anticrossing."""


class ConvergenceError(NVClockError, RuntimeError):
    """A numerical fit or solver failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
