"""Exception types raised by ozcheck."""


class OzCheckError(Exception):
    """Base class for all ozcheck errors."""


class DomainError(OzCheckError, ValueError):
    """An argument lies outside the domain of an operation."""


class StructuralError(OzCheckError, ValueError):
    """Grid, dimension or block mismatch between operands."""


class PositivityError(OzCheckError, ValueError):
    """A matrix function expected to be positive has a negative eigenvalue."""


class CalculusDomainError(DomainError):
    """Order-zero functional calculus needs a function vanishing at 0."""


class NotSquareZeroError(OzCheckError, ValueError):
    pass


class ContractionError(OzCheckError, ValueError):
    pass


class PreconditionError(OzCheckError, ValueError):
    """Inputs to a construction fail the relations the construction assumes."""


class DecompositionError(OzCheckError, AssertionError):
    """Eigenvalue fingerprint disagrees with the predicted fibre decomposition."""


class ConstructionError(OzCheckError, RuntimeError):
    pass


class ResourceError(OzCheckError, MemoryError):
    """Requested computation exceeds the configured size budget."""


class IllConditionedSupportWarning(UserWarning):
    """Spectrum of phi(1) has mass just above the rank cutoff."""
