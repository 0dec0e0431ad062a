from __future__ import annotations


class MbdynError(Exception):
    """Base class for package errors."""


class SizingError(MbdynError, ValueError):
    """Requested basis or matrix is larger than the configured cap."""


class NumericalError(MbdynError, ArithmeticError):
    """A numerical routine failed to converge or violated its accuracy contract."""


class ConfigError(MbdynError, ValueError):
    """Invalid experiment configuration."""


class FitError(NumericalError):
    """Strength-function fit could not be completed."""
