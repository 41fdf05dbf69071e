"""Exception hierarchy. Each error carries the CLI exit code it maps to."""

from __future__ import annotations


class DPScoutError(Exception):
    exit_code = 1


class LexError(DPScoutError):
    """Raised when Java source cannot be lexed (unterminated comment or literal)."""

    def __init__(self, message: str, offset: int, path: str | None = None) -> None:
        self.reason = message
        self.offset = offset
        self.path = path
        where = f"{path}: " if path else ""
        super().__init__(f"{where}{message} at byte offset {offset}")


class IngestError(DPScoutError):
    pass


class AnnotationError(DPScoutError):
    """Malformed annotation XML or an invalid pattern instance."""


class VocabularyError(AnnotationError):
    def __init__(self, role: str, pattern_name: str) -> None:
        self.role = role
        super().__init__(f"role {role!r} is not part of the {pattern_name} role vocabulary")


class ConfigError(DPScoutError):
    pass


class UsageError(DPScoutError):
    exit_code = 3


class EmptySnippetError(DPScoutError):
    pass


class CassetteError(DPScoutError):
    pass


class TransportError(DPScoutError):
    exit_code = 2

    def __init__(self, message: str, status: str) -> None:
        self.status = status
        super().__init__(message)


class ScoringError(DPScoutError):
    pass


class StageError(DPScoutError):
    """A pipeline stage was invoked before the artifact it consumes exists."""
