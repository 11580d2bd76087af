"""Exception hierarchy shared across the toolkit.

Every error class carries the process exit code the CLI maps it to:
parse errors (including unreadable input files) exit with 2, schema
violations with 3, domain/config errors with 4, and partial experiment
results with 5.
"""


class ExitboundError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class TraceParseError(ExitboundError):
    """Malformed trace file: unreadable path, bad JSON line, bad header."""

    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TraceSchemaError(ExitboundError):
    """Structurally valid file whose content violates the header contract."""

    exit_code = 3


class DuplicateSampleError(TraceSchemaError):
    """Two samples share a sample_id."""


class DomainError(ExitboundError):
    """Invalid argument values: bad delta, bad fractions, bad config."""

    exit_code = 4


class ConfigMismatchError(DomainError):
    """Policy or bound configuration inconsistent with the trace (e.g. fixed_k > K)."""


class HeaderMismatchError(DomainError):
    """Two traces that must share a header (K, C, loss_kind) do not."""


class MissingInputError(DomainError):
    """A requested computation lacks a required auxiliary input; names the flag."""


class UnlabeledTraceError(DomainError):
    """An operation requiring labels was given an unlabeled trace."""


class TrainingDivergedError(DomainError):
    """Training loss became non-finite."""


class PartialResultError(ExitboundError):
    """An experiment completed only for a subset of seeds."""

    exit_code = 5
