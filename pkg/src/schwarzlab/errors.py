"""Exception hierarchy shared by all solver modules."""


class SchwarzLabError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(SchwarzLabError):
    """Invalid input or violated precondition (caller's fault)."""


class NumericalError(SchwarzLabError):
    """A numerical procedure failed (non-convergence, breakdown, ...)."""


class SpdViolationError(NumericalError):
    """A matrix assumed symmetric positive definite turned out not to be."""
