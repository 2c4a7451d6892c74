"""Typed errors raised across the package."""
from __future__ import annotations


class CosivoteError(Exception):
    """Base class for all package errors."""


class EmptyInputError(CosivoteError):
    """Raw text is blank, or contains no step content at all."""


class EmptyDiagnosisError(CosivoteError):
    """Diagnosis has no steps to render."""


class EmptyTextError(CosivoteError):
    """A required text field is empty."""


class StepAbsentError(CosivoteError):
    """A requested step is not present in a diagnosis."""

    def __init__(self, scope, candidate_index=None):
        self.scope = scope
        self.candidate_index = candidate_index
        where = "" if candidate_index is None else f" (pool index {candidate_index})"
        super().__init__(f"step {scope.value!r} absent{where}")


class DimensionMismatchError(CosivoteError):
    """Vectors of different widths were combined."""


class ZeroVectorError(CosivoteError):
    """An all-zero vector has no direction."""


class BackendUnavailableError(CosivoteError):
    """A remote backend could not be reached after bounded retries."""


class PoolTooSmallError(CosivoteError):
    """Voting needs at least two candidates."""


class EmptyScoresError(CosivoteError):
    """Winner selection over an empty score list."""


class MalformedVerdictError(CosivoteError):
    """No parseable score/reasoning record in a judge reply."""


class ScoreOutOfRangeError(CosivoteError):
    """A rubric score outside [0, 1]."""


class TooFewCandidatesError(CosivoteError):
    """Pair building needs at least two scored candidates."""


class DuplicateIndexError(CosivoteError):
    """Two scored candidates share a candidate index."""


class SchemaViolationError(CosivoteError):
    """A dataset line does not match its file contract."""

    def __init__(self, message, line=None):
        self.line = line
        where = "" if line is None else f"line {line}: "
        super().__init__(f"{where}{message}")


class GensOutOfRangeError(CosivoteError):
    """Requested generation count exceeds the stored sampled pool."""


class MissingVerdictError(CosivoteError):
    """An evaluation record lacks verdicts for the requested scope/pool."""


class MissingWinnerError(CosivoteError):
    """An evaluation record lacks a winner for the requested strategy/gens."""


class ZeroDenominatorError(CosivoteError):
    """Percentage of nothing."""


class IncompleteReportError(CosivoteError):
    """Report rendering needs at least one complete scope block."""
