"""Exception hierarchy shared across the package."""


class LineageError(Exception):
    """Base class for all errors raised by this package."""


class IngestError(LineageError):
    """Malformed or inadmissible input data (CSV rows, stream records)."""


class SchemaError(LineageError):
    """Reference to an attribute that does not exist or has the wrong kind."""


class PredicateError(LineageError):
    """Ill-formed predicate: unknown attribute, reserved attribute, bad operator."""


class ParameterError(LineageError):
    """Out-of-range guarantee or configuration parameter."""


class DegenerateRelationError(LineageError):
    """The requested attribute carries no mass, so no sampling distribution exists."""


class SketchFormatError(LineageError):
    """Corrupt, tampered, or unsupported persisted sketch file."""
