"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage/config problems exit 1, data
problems exit 2, backend/transport problems exit 3.
"""


class PhraseMineError(Exception):
    """Base class for all package errors."""


class ConfigError(PhraseMineError):
    """Invalid configuration file or option value."""


class DataError(PhraseMineError):
    """Invalid corpus, span, or label data."""


class CorpusFormatError(DataError):
    """A corpus or JSONL file could not be parsed."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class BackendError(PhraseMineError):
    """Encoder backend failure."""


class TransportError(BackendError):
    """Remote backend could not be reached or kept failing."""


class ProtocolError(BackendError):
    """Remote backend returned a malformed or unexpected response."""


class DimMismatchError(ProtocolError):
    """Remote backend returned vectors of the wrong dimension."""


class OversizeRequestError(BackendError):
    """Request exceeds the backend's piece budget; raised before dispatch."""


class BatchError(BackendError):
    """A batch element failed; carries the offending index."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"batch item {index}: {cause}")
        self.index = index
