"""Exception vocabulary shared by every module.

Each named failure mode in the public contracts gets its own class so callers
(and the CLI's exit-code mapping) can branch on the type instead of parsing
messages.
"""

from __future__ import annotations


class AuditError(Exception):
    """Base class for every error raised by this package."""


class InvalidDimensionError(AuditError):
    """Dimension is zero, negative, above the cap, or inconsistent."""


class InvalidParameterError(AuditError):
    """A numeric or structural argument is outside its contract."""


class InvalidDistributionError(AuditError):
    """A distribution cannot support the requested operation."""


class InvalidSpecError(AuditError):
    """A model description is malformed (non-total table, bad weights...)."""


class BudgetExceededError(AuditError):
    """A query batch would overrun the audit budget; no labels were issued.

    ``shortfall`` is how many queries the batch needed beyond the remainder.
    """

    def __init__(self, message: str, shortfall: int = 0):
        super().__init__(message)
        self.shortfall = shortfall


class TransportError(AuditError):
    """The external-model connection failed or broke protocol.

    ``acknowledged`` is how many labels were received before the failure
    (the query counter advances by exactly this amount).
    """

    def __init__(self, message: str, acknowledged: int = 0):
        super().__init__(message)
        self.acknowledged = acknowledged


class PartialEstimateError(AuditError):
    """Budget died mid-estimate; carries how many samples completed."""

    def __init__(self, message: str, samples_completed: int = 0):
        super().__init__(message)
        self.samples_completed = samples_completed


class DegenerateGroupError(AuditError):
    """A sensitive group has probability 0 or 1; group rates are undefined."""


class StarvedGroupError(AuditError):
    """Sampling could not fill a group within the retry cap; names the group."""

    def __init__(self, message: str, group: int = 0):
        super().__init__(message)
        self.group = group


class NoValidPairError(AuditError):
    """Every label pair of a multiclass audit was skipped."""


class UnsupportedPropertyError(AuditError):
    """The property has no characteristic function on this path."""


class TooLargeError(AuditError):
    """Exact enumeration is out of reach; a Monte-Carlo semi-oracle
    (harness.mc_reference) is the fallback."""


class OracleError(AuditError):
    """An oracle failed mid-enumeration; carries partial progress."""

    def __init__(self, message: str, points_labeled: int = 0):
        super().__init__(message)
        self.points_labeled = points_labeled


class DatasetError(AuditError):
    """Base class for CSV ingestion failures."""


class EmptyFileError(DatasetError):
    """The dataset file holds no data rows."""


class UnmappedCategoryError(DatasetError):
    """A categorical cell has no rule in the schema."""


class NonNumericCellError(DatasetError):
    """A thresholded column holds a value that does not parse as a number."""
