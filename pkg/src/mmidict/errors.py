"""Exception types shared across the package."""


class MmidictError(Exception):
    """Base class for all package errors."""


class ValidationError(MmidictError, ValueError):
    """Bad input: violated precondition, malformed file, inconsistent shapes."""


class NumericalError(MmidictError, RuntimeError):
    """Computation failed for numerical reasons (e.g. a block that is not PD)."""
