"""Exception types shared across the package."""


class SensqError(Exception):
    """Base class for all sensq errors."""


class DimensionMismatch(SensqError):
    """Input or layer dimensions do not agree."""


class ArchitectureMismatch(SensqError):
    """Two models that must share an architecture do not."""


class DomainError(SensqError):
    """Argument outside the mathematical domain of an operation."""


class ModelFormatError(SensqError):
    """Model JSON document is malformed or violates an invariant."""


class DatasetError(SensqError):
    """Dataset file or contents violate the dataset contract."""


class TrainingError(SensqError):
    """Training diverged or was configured inconsistently."""


class QuerySpecError(SensqError):
    """Query specification is invalid for the given model."""


class EncodingError(SensqError):
    """Script emission failed (plan/model mismatch, non-finite literal)."""


class SolverError(SensqError):
    """Solver binary missing, crashed, or produced unparsable output."""


class UnsupportedValue(SolverError):
    """Solver returned a value form we do not parse (e.g. algebraic roots)."""
