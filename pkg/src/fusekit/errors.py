"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: validation/parse problems exit 1,
I/O and transport problems exit 2.
"""

from __future__ import annotations


class FusekitError(Exception):
    """Base class for all toolkit errors."""


class ParseError(FusekitError):
    """A line of an input file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(FusekitError):
    """Parsed data violates a documented invariant."""


class AnswerTagError(ValidationError):
    """A model response did not contain a usable answer tag.

    `reason` is one of "missing", "non_numeric", "out_of_range" so a
    caller can pick the right retry prompt.
    """

    def __init__(self, message: str, reason: str):
        self.reason = reason
        super().__init__(message)


class TransportError(FusekitError):
    """A remote service could not be reached or kept failing."""


class PipelineStageError(FusekitError):
    """A pipeline stage failed; carries the stage name and query id."""

    def __init__(self, stage: str, query_id: str | None, cause: Exception):
        self.stage = stage
        self.query_id = query_id
        self.cause = cause
        where = f"stage {stage!r}" + (f", query {query_id!r}" if query_id else "")
        super().__init__(f"{where}: {cause}")
