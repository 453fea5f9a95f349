"""Error types shared across the package.

Every error carries a stable machine code so the HTTP layer and the CLI can
map failures without string matching.
"""

from __future__ import annotations

from typing import Any


class MatchboardError(Exception):
    """Base class; `code` is stable across versions, `details` is structured."""

    code = "INTERNAL"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_payload(self) -> dict:
        return {"code": self.code, "message": self.message, "details": self.details}


class DomainError(MatchboardError):
    """Contract violation by the caller (bad ids, bad ranges, bad shapes)."""

    code = "DOMAIN_ERROR"


class ValidationFailedError(MatchboardError):
    code = "VALIDATION_FAILED"

    def __init__(self, message: str, report=None, **details: Any):
        super().__init__(message, **details)
        self.report = report


class ParseError(MatchboardError):
    code = "PARSE_ERROR"

    def __init__(self, message: str, line: int | None = None, column: str | None = None, **details: Any):
        super().__init__(message, line=line, column=column, **details)
        self.line = line
        self.column = column


class DegenerateLabelsError(MatchboardError):
    code = "DEGENERATE_LABELS"


class InvalidFeatureError(MatchboardError):
    code = "INVALID_FEATURE"


class SchemaMismatchError(DomainError):
    code = "SCHEMA_MISMATCH"


class InfeasibleLocksError(MatchboardError):
    """Locked pairs alone exceed a location's case or member capacity."""

    code = "INFEASIBLE_LOCKS"

    def __init__(self, message: str, locations: list[str], **details: Any):
        super().__init__(message, locations=list(locations), **details)
        self.locations = list(locations)


class InfeasibleError(MatchboardError):
    code = "INFEASIBLE"


class SizeGuardError(DomainError):
    code = "SIZE_GUARD"


class MoveLockedError(MatchboardError):
    code = "MOVE_LOCKED"


class LockUnassignedError(MatchboardError):
    code = "LOCK_UNASSIGNED"


class NegativeCapacityError(MatchboardError):
    code = "NEGATIVE_CAPACITY"


class ConflictError(MatchboardError):
    """Stale-revision mutation; carries the session's current revision."""

    code = "CONFLICT"

    def __init__(self, message: str, current_revision: int, **details: Any):
        super().__init__(message, current_revision=current_revision, **details)
        self.current_revision = current_revision


class SessionNotFoundError(MatchboardError):
    code = "SESSION_NOT_FOUND"


class SnapshotError(MatchboardError):
    code = "SNAPSHOT_ERROR"
