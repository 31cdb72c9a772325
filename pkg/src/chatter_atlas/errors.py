"""Exception hierarchy shared by the pipeline stages."""


class ChatterAtlasError(Exception):
    """Base class for all errors raised by this package."""


class InputError(ChatterAtlasError, ValueError):
    """Caller supplied data that violates an operation's preconditions."""


class EmptyDatasetError(InputError):
    pass


class ConfigurationError(InputError):
    pass


class MergeSpecError(InputError):
    """A merge spec references unknown clusters or repeats an id."""


class NumericError(ChatterAtlasError, ArithmeticError):
    pass


class BackendError(ChatterAtlasError):
    """The embedding backend failed (after retries, where applicable)."""


class ProtocolError(BackendError):
    """The embedding service answered with a malformed response."""


class AuthError(BackendError):
    """Non-retryable 4xx from the embedding service."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status
