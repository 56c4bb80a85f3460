"""Exception hierarchy shared across the package."""

from __future__ import annotations


class NewslineError(Exception):
    """Base class for every error raised by this package."""


class DateError(NewslineError, ValueError):
    pass


class MalformedDate(DateError):
    """Text is not shaped like ``YYYY-MM-DD``."""


class InvalidDate(DateError):
    """Text is shaped correctly but names a day that does not exist."""


class EmptyDocument(NewslineError, ValueError):
    pass


class EmptyQuery(NewslineError, ValueError):
    pass


class ProviderError(NewslineError):
    """Search or page-reader transport/auth failure."""


class RateLimited(ProviderError):
    pass


class BackendError(NewslineError):
    """Chat or embedding backend failure."""


class BudgetExceeded(NewslineError):
    pass


class UnparseableOutput(NewslineError):
    pass


class MissingBinding(NewslineError, KeyError):
    def __str__(self) -> str:  # KeyError repr-quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class InsufficientQuestions(NewslineError):
    pass


class CorruptPoolFile(NewslineError):
    pass


class MissingReference(NewslineError):
    pass


class SchemaError(NewslineError, ValueError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
