"""Exception hierarchy shared by every module."""

from __future__ import annotations


class LevySwitchError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(LevySwitchError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(LevySwitchError, ValueError):
    """A model or run configuration is malformed."""


class AssumptionViolation(LevySwitchError):
    """A standing assumption of an identity fails (ordering or drift condition)."""


class NumericalError(LevySwitchError, ArithmeticError):
    """Quadrature, root finding or inversion did not produce a finite answer."""


class TruncationError(NumericalError):
    """An improper integral would need truncating beyond the configured limit."""


class ScaleBuildError(NumericalError):
    """A scale-function table failed its build-time checks."""
