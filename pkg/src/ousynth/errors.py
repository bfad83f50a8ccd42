"""Exception hierarchy.

Every error raised on purpose by the package derives from ``OusynthError``;
the CLI prints the class name as the machine-parseable error tag.
"""


class OusynthError(Exception):
    """Base class for all package errors."""


class DomainError(OusynthError, ValueError):
    """A value lies outside its mathematical domain (non-positive price, return <= -1, ...)."""


class AlignmentError(OusynthError, ValueError):
    """Date axes or column sets do not line up."""


class InsufficientDataError(OusynthError, ValueError):
    pass


class DecompositionError(OusynthError, ValueError):
    """Covariance matrix could not be factorised even after jitter."""


class RankDeficientError(OusynthError, ValueError):
    pass


class DegenerateSampleError(OusynthError, ValueError):
    pass


class GenerationError(OusynthError, RuntimeError):
    """Scenario generation exhausted its retry budget."""


class IngestError(OusynthError, ValueError):
    pass


class SchemaError(OusynthError, ValueError):
    """A persisted file is malformed or has a corrupted field."""


class SchemaVersionError(SchemaError):
    pass


class InvariantViolationError(OusynthError, ValueError):
    pass


class NearSingularWarning(UserWarning):
    """Reversion matrix is numerically singular; mu/gamma came from a pseudo-inverse."""
