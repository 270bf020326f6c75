"""Shared exception types.

Module-specific failures subclass MrmError next to the code that raises
them; only errors shared across modules live here.
"""


class MrmError(Exception):
    """Base class for all errors raised by this package."""


class EndpointUnreachable(MrmError):
    """Transport failed after retries (connection error or 5xx)."""


class EndpointRefused(MrmError):
    """Endpoint answered with a non-2xx status or a policy refusal."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class DimensionMismatch(MrmError):
    """Vectors of unequal dimension where a uniform dimension is required."""


class ZeroVector(MrmError):
    """A vector with no nonzero entry where a direction is required."""


class EmptyInput(MrmError):
    """An input collection that must be non-empty was empty."""


class CorpusError(MrmError):
    """Base for corpus-file problems; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class ParseError(CorpusError):
    pass


class DuplicateId(CorpusError):
    def __init__(self, sample_id: str, line: int | None = None):
        super().__init__(f"duplicate sample id {sample_id!r}", line)
        self.sample_id = sample_id


class SchemaViolation(CorpusError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        super().__init__(message, line)
        self.field = field
