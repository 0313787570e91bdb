"""Exception hierarchy shared across the package.

Exit codes used by the CLI: 2 usage/validation, 3 IO/format, 4 numeric.
"""

from __future__ import annotations


class ProtoclassError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class UsageError(ProtoclassError):
    """Invalid arguments or contract violations caught before any work."""

    exit_code = 2


class FormatError(ProtoclassError):
    """Malformed or inconsistent on-disk artifacts."""

    exit_code = 3


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class DimensionMismatchError(FormatError):
    pass


class NonFiniteValueError(FormatError):
    """A stored vector contains NaN or Inf."""


class NumericError(ProtoclassError):
    """Numeric failure during computation (not a file problem)."""

    exit_code = 4
