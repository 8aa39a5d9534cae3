"""Exception hierarchy shared across the package."""


class SynspaceError(Exception):
    """Base class for all data-level errors raised by this package."""


class DimensionMismatchError(SynspaceError):
    pass


class ZeroVectorError(SynspaceError):
    pass


class FormatError(SynspaceError):
    """Malformed embedding file or manifest."""


class BadMagicError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class NonFiniteValueError(FormatError):
    pass


class EmptyFieldError(SynspaceError):
    pass


class NetworkError(SynspaceError):
    pass


class ParseError(SynspaceError):
    """Unusable response body; the raw body is kept on ``.raw_body``."""

    def __init__(self, message: str, raw_body: str = ""):
        super().__init__(message)
        self.raw_body = raw_body


class RateLimitedError(NetworkError):
    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class EmptySetError(SynspaceError):
    pass


class EmptySpaceError(SynspaceError):
    pass


class MissingEmbeddingsError(SynspaceError):
    def __init__(self, class_name: str, detail: str = ""):
        msg = f"no embeddings available for class {class_name!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.class_name = class_name


class EmptyCoreError(SynspaceError):
    def __init__(self, class_name: str):
        super().__init__(f"empty core component for class {class_name!r}")
        self.class_name = class_name


class LabelOutOfRangeError(SynspaceError):
    pass


class EmptyQuerySetError(SynspaceError):
    pass


class NumericalOverflowError(SynspaceError):
    pass


class InvalidRateError(SynspaceError):
    pass
