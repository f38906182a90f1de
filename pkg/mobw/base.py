"""Exception hierarchy shared by every mobw module."""

import math
from typing import Any

try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        """Backport of enum.StrEnum (Python 3.11)."""

        __str__ = str.__str__
        __format__ = str.__format__

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()


class MOBWError(Exception):
    """Raised when an inference routine cannot proceed."""

    def __init__(self, message: str):
        self.message = message
        super().__init__(message)


class DomainError(MOBWError):
    """An argument lies outside the support of a density or function."""


class InvalidInputError(MOBWError):
    """Parameters or data fail validation."""


class ParseError(InvalidInputError):
    """A data file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemeError(InvalidInputError):
    """A censoring scheme is inconsistent with the data it is applied to."""


class BracketError(MOBWError):
    """The mode of the shape-parameter marginal could not be bracketed."""


class InsufficientSampleError(MOBWError):
    """Too few posterior draws for the requested summary."""


class HyperMismatchError(MOBWError):
    """Bayes-factor hyperparameters do not satisfy the closed-form constraint."""


class StudyFailureError(MOBWError):
    """Too many Monte Carlo replications failed."""


class CommandError(MOBWError):
    """Raised when a command cannot produce its outputs."""


def require_positive(name: str, value: Any) -> float:
    """Returns value as a float, raising InvalidInputError unless it is finite and > 0."""
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidInputError(f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(value) or value <= 0:
        raise InvalidInputError(f"{name} must be a finite positive number, got {value}")
    return value
