"""Exception hierarchy shared across the package."""


class PskSdrError(Exception):
    """Base class for all package errors."""


class ParameterError(PskSdrError, ValueError):
    """Invalid numeric parameter (dimensions, variances, trial counts)."""


class UsageError(ParameterError):
    """Operation called in a regime it does not support (e.g. wrong M)."""


class SchemaError(PskSdrError, ValueError):
    """Serialized data is missing a field or has the wrong shape."""


class InvariantError(PskSdrError, ValueError):
    """Data parses but violates a mathematical invariant."""


class CertificateError(PskSdrError, ValueError):
    """A matrix expected to be PSD is not, beyond tolerance."""


class ExtractionError(PskSdrError, RuntimeError):
    """Dual multipliers could not be mapped back to a valid certificate."""


class EnumerationLimitError(ParameterError):
    """Brute-force enumeration would exceed the candidate guard."""
