"""Simulator for a temperature-compensated NV-center composite frequency reference."""
__version__ = "0.1.0"

from .errors import ConfigError, ConvergenceError, DomainError, NearGSLACError, NVClockError
from .spin_model import SpinConstants, approx_frequencies, transition_frequencies

__all__ = [
    "__version__",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "NearGSLACError",
    "NVClockError",
    "SpinConstants",
    "approx_frequencies",
    "transition_frequencies",
]
