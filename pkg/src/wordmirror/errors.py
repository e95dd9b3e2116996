"""Exception types shared across the package."""

from __future__ import annotations


class WordMirrorError(Exception):
    """Base class for all package errors."""


class EmbeddingFormatError(WordMirrorError):
    """Malformed embedding text file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownTokenError(WordMirrorError, KeyError):
    def __init__(self, token: str):
        self.token = token
        super().__init__(token)

    def __str__(self) -> str:
        return f"unknown token: {self.token!r}"


class ZeroNormError(WordMirrorError, ValueError):
    """Cosine similarity is undefined for a zero vector."""


class DegenerateMirrorError(WordMirrorError, ValueError):
    def __init__(self, norm: float, word: str | None = None):
        self.norm = norm
        self.word = word
        where = f" for word {word!r}" if word is not None else ""
        super().__init__(f"degenerate mirror normal (|a| = {norm:.3g}){where}")


class KnowledgeRequiredError(WordMirrorError, ValueError):
    """Analogy transfer with explicit knowledge got a word with no side."""


class DatasetError(WordMirrorError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonFiniteError(WordMirrorError, FloatingPointError):
    """Raised when a loss or gradient stops being finite."""
