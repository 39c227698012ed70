"""Semantic exception hierarchy.

Every failure mode exposed by the library raises one of these instead of a
bare ValueError, so callers (and the CLI) can tell apart bad inputs, numeric
breakdowns, and unsupported problem sizes.
"""


class ScorelabError(Exception):
    """Base class for all library errors."""


class DomainError(ScorelabError, ValueError):
    """Input outside the mathematical domain of an operation."""


class SingularityError(DomainError):
    """Evaluation exactly at a singular point (e.g. conditional score at t=0)."""


class RegionError(DomainError):
    """Evaluation refused in a region where the quantity underflows."""


class UnsupportedError(ScorelabError):
    """Problem size or configuration outside what the implementation supports."""


class NumericError(ScorelabError):
    """A numeric procedure failed to converge or produced non-finite values."""


class TrainingError(NumericError):
    """Training diverged; carries the offending step index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class BlowUpError(NumericError):
    """SDE integration produced a non-finite state; carries the step index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class StudyError(ScorelabError):
    """A benchmark study could not produce enough successful runs."""


class FormatError(ScorelabError):
    """File or schema mismatch in persisted artifacts."""
