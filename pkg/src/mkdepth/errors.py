"""Exception hierarchy shared across the library, service and CLI.

Every error carries a stable kebab-case ``code`` so that the HTTP layer
and the CLI can map failures to structured payloads and exit codes
without string-matching messages.
"""

from __future__ import annotations


class MKDepthError(Exception):
    """Base class for all library errors."""

    code = "error"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context


class InputError(MKDepthError):
    """Invalid user input: malformed files, bad shapes, bad parameters."""

    code = "invalid-input"


class ParseError(InputError):
    code = "parse-error"


class InconsistentArityError(InputError):
    code = "inconsistent-arity"


class NonpositiveWeightError(InputError):
    code = "nonpositive-weight"


class InvalidDimensionError(InputError):
    code = "invalid-dimension"


class UnsupportedDimensionError(InputError):
    code = "unsupported-dimension"


class SizeMismatchError(InputError):
    code = "size-mismatch"


class NonuniformWeightsError(InputError):
    code = "nonuniform-weights"


class DimensionMismatchError(InputError):
    code = "dimension-mismatch"


class EmptySupportError(InputError):
    code = "empty-support"


class EmptySetError(InputError):
    code = "empty-set"


class InstanceTooLargeError(InputError):
    code = "instance-too-large"


class InvalidTauError(InputError):
    code = "invalid-tau"


class TauOutOfRangeError(InputError):
    code = "tau-out-of-range"


class NoOracleError(InputError):
    code = "no-oracle"


class UnfittedError(InputError):
    code = "unfitted"


class SolverError(MKDepthError):
    """A solver failed to produce a certified solution."""

    code = "solver-failure"


class NumericalFailureError(SolverError):
    code = "numerical-failure"


class MaxItersExceededError(SolverError):
    code = "max-iters-exceeded"


class EmptyCellError(SolverError):
    code = "empty-cell-unrecoverable"


class DisconnectedSlacknessGraphError(SolverError):
    code = "disconnected-slackness-graph"
