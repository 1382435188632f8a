"""Exception taxonomy shared by the library and the CLI exit-code mapping."""

from __future__ import annotations


class SylvkitError(Exception):
    """Base class for every error raised by sylvkit."""


class DomainError(SylvkitError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class OutOfCoverageError(SylvkitError, LookupError):
    """A query reaches beyond the range covered by a prime table."""


class ResourceLimitError(SylvkitError):
    """A configured cap (memory, search bound, oracle scale) was exceeded."""


class InconclusiveEvaluationError(SylvkitError):
    """A certified comparison could not be decided before the precision cap.

    ``best`` holds the tightest interval obtained.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best
