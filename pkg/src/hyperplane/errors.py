"""Exception types shared across the package."""


class HyperplaneError(Exception):
    """Base class for package errors."""


class DomainError(HyperplaneError, ValueError):
    """Argument outside the mathematically admissible range."""


class ConventionHoleError(DomainError):
    """Counting formula evaluated at a parameter pair where the
    double-factorial conventions leave it undefined.

    The offending values must be obtained from the series oracle instead of
    guessing a convention."""


class CapacityError(HyperplaneError, RuntimeError):
    """A precomputed table is too small for the requested operation."""


class RejectionBudgetError(HyperplaneError, RuntimeError):
    """A rejection sampler exhausted its retry budget."""
