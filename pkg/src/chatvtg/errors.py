"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ChatVTGError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(ChatVTGError, ValueError):
    """A caller-supplied value violates a precondition."""


class CacheMissError(ChatVTGError, KeyError):
    """A replay-only provider was asked for a key it does not hold."""

    def __str__(self) -> str:  # KeyError quotes its arg; keep the message readable
        return Exception.__str__(self)


class ProviderUnavailableError(ChatVTGError):
    """A remote provider failed after exhausting retries."""


class ConsistencyError(ChatVTGError):
    """An internal invariant was violated (e.g. embedding dimension drift)."""


class FormatError(ChatVTGError):
    """An input file does not conform to its declared format."""


class EvaluationError(ChatVTGError):
    """Predictions and annotations could not be joined or scored."""
