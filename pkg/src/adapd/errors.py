"""Exception hierarchy shared across the package."""

from __future__ import annotations

__all__ = [
    "AdapdError",
    "TopologyError",
    "TopologyGenerationError",
    "InvalidParameterError",
    "DegenerateSpectrumError",
    "DimensionMismatchError",
    "ParseError",
    "LabelDomainError",
    "PartitionError",
    "InexactnessError",
    "DivergenceError",
    "ConfigError",
    "DataError",
    "GridExhaustedError",
]


class AdapdError(Exception):
    """Base class for all errors raised by this package."""


class TopologyError(AdapdError, ValueError):
    """Invalid graph or mixing-matrix construction parameters."""


class TopologyGenerationError(TopologyError):
    """Random graph generation failed to produce a connected graph."""

    def __init__(self, message: str, attempts: int) -> None:
        super().__init__(message)
        self.attempts = attempts


class InvalidParameterError(AdapdError, ValueError):
    """A numeric parameter violates its documented bound."""


class DegenerateSpectrumError(AdapdError):
    """The mixing matrix has no usable spectral gap (rho ~ 1 or rho = 1)."""


class DimensionMismatchError(AdapdError, ValueError):
    """Array shapes disagree with the declared problem dimensions."""


class ParseError(AdapdError, ValueError):
    """Malformed input file; carries line (1-based) and column when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None) -> None:
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class LabelDomainError(ParseError):
    """A classification label is outside the accepted {-1,+1,0,1} domain."""


class PartitionError(AdapdError, ValueError):
    """A dataset partition is empty, overlapping, or infeasible."""


class InexactnessError(AdapdError):
    """An inner subproblem solve missed its residual tolerance.

    ``best_residual_sq`` is the smallest squared residual norm reached.
    """

    def __init__(self, message: str, best_residual_sq: float, iterations: int) -> None:
        super().__init__(message)
        self.best_residual_sq = best_residual_sq
        self.iterations = iterations


class DivergenceError(AdapdError):
    """Iterates became non-finite or exceeded the norm guard.

    ``snapshot`` holds the offending iterate blocks for post-mortems.
    """

    def __init__(self, message: str, snapshot: dict | None = None) -> None:
        super().__init__(message)
        self.snapshot = snapshot or {}


class ConfigError(AdapdError, ValueError):
    """Experiment configuration failed validation."""


class DataError(AdapdError):
    """A data file is missing or unusable."""


class GridExhaustedError(AdapdError):
    """Every grid point diverged or failed; no winner can be selected."""
