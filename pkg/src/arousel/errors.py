"""Exception hierarchy and warning categories.

Exit-code mapping used by the CLI: ConfigError -> 4, DataError (and
subclasses) -> 2, NumericError -> 3.  ContractViolation signals a caller bug
(bad argument shapes/values) and also maps to 3 when it escapes to the CLI.
"""

from __future__ import annotations


class ArouselError(Exception):
    """Base class for package errors."""


class ConfigError(ArouselError):
    """Invalid or inconsistent configuration."""

    exit_code = 4


class DataError(ArouselError):
    """Malformed or insufficient input data."""

    exit_code = 2


class WindowError(DataError):
    """A requested analysis window cannot be cut from a recording."""


class SignalQualityError(DataError):
    """A signal is too degraded for the requested operation."""


class DegenerateSignalError(DataError):
    """Constant or otherwise degenerate signal where variation is required."""


class InsufficientDataError(DataError):
    """Not enough samples/beats for the requested operation."""


class DependencyError(DataError):
    """A pipeline stage output required by this stage is missing."""


class NumericError(ArouselError):
    """An iterative numerical procedure failed to converge."""

    exit_code = 3


class ContractViolation(ArouselError):
    """An argument violates a documented precondition."""

    exit_code = 3


class FeatureWarning(UserWarning):
    """A feature was degenerate and replaced by its documented fallback."""


class DataWarning(UserWarning):
    """Input data required a documented fallback (imputation, short segment)."""
