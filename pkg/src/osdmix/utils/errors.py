"""
Error handling module for osdmix.

This module defines the exception hierarchy shared by the numerical core,
the configuration layer and the command-line front end.
"""

from typing import Any, Callable, Dict, Optional, Type


class OsdmixError(Exception):
    """Base exception for all osdmix-specific errors."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        """
        Initialize the error.

        Args:
            message: The error message
            details: Additional error details as a dictionary
        """
        self.message = message
        self.details = details or {}
        super().__init__(message)

    def __str__(self) -> str:
        if self.details:
            details_str = ", ".join(f"{k}={v}" for k, v in self.details.items())
            return f"{self.message} ({details_str})"
        return self.message


class ConfigurationError(OsdmixError):
    """Error related to configuration issues."""

    pass


class MissingConfigError(ConfigurationError):
    """Error for missing configuration files or items."""

    pass


class InvalidConfigError(ConfigurationError):
    """Error for invalid configuration values."""

    pass


class LinalgError(OsdmixError):
    """Error raised by the dense matrix kernels."""

    pass


class MagnitudeError(LinalgError):
    """Matrix exponential overflowed to a non-finite result."""

    pass


class SpectrumError(LinalgError):
    """Spectrum outside the region where the principal logarithm exists."""

    pass


class SubspaceError(LinalgError):
    """Operation undefined on the given subspace (e.g. rank zero)."""

    pass


class DomainError(OsdmixError):
    """Argument outside the domain of an operation."""

    pass


class PreconditionError(OsdmixError):
    """A documented precondition of an operation does not hold."""

    pass


class NotCompactError(PreconditionError):
    """Powers of a matrix are unbounded."""

    pass


class HorizonError(OsdmixError):
    """Finite data or finite simulation horizon too short for the requested quantity."""

    pass


class DegenerateSampleError(OsdmixError):
    """Sampled matrices or sums are singular where invertibility is required."""

    pass


class InfinitesimalityError(OsdmixError):
    """Tail probabilities do not vanish within the observed horizon."""

    pass


class ProcessSpecError(OsdmixError):
    """A process specification cannot generate a strongly mixing sequence."""

    def __init__(
        self,
        message: str,
        variant: Optional[str] = None,
        spectral_radius: Optional[float] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        if details is None:
            details = {}
        if variant is not None:
            details["variant"] = variant
        if spectral_radius is not None:
            details["spectral_radius"] = spectral_radius
        super().__init__(message, details)


# Error handler registry
_ERROR_HANDLERS: Dict[Type[OsdmixError], Callable[[OsdmixError], Any]] = {}


def register_error_handler(
    error_class: Type[OsdmixError], handler: Callable[[OsdmixError], Any]
) -> None:
    """
    Register a handler for a specific error type.

    Args:
        error_class: The error class to handle
        handler: The handler function
    """
    _ERROR_HANDLERS[error_class] = handler


def handle_error(error: OsdmixError) -> Any:
    """
    Handle an error using registered handlers.

    The first registered handler whose class matches wins; without a match the
    error is re-raised.
    """
    for error_class, handler in _ERROR_HANDLERS.items():
        if isinstance(error, error_class):
            return handler(error)
    raise error


def format_error(error: OsdmixError) -> str:
    """
    Format an error for display.

    Args:
        error: The error to format

    Returns:
        Formatted error message
    """
    message = f"Error: {error.message}"

    if error.details:
        message += "\nDetails:"
        for key, value in error.details.items():
            message += f"\n  {key}: {value}"

    return message
