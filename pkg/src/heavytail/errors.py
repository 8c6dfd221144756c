"""Exception types shared by all modules."""


class HeavytailError(Exception):
    """Base class for library errors."""


class DomainError(HeavytailError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class QuadratureError(HeavytailError, ArithmeticError):
    """A quadrature or series acceleration did not reach its tolerance.

    ``estimate`` is the best value available, ``error`` the achieved error
    estimate, ``diagnostics`` free-form context (partial sums, offending
    parameters).
    """

    def __init__(self, message, estimate=None, error=None, diagnostics=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
        self.diagnostics = diagnostics or {}


class StabilityOrderError(HeavytailError):
    """Raised when a probe sequence shows the kernel is not stable at the requested order."""


class SelectionError(DomainError):
    """A selection function left (0, 2) on a probe."""


class PreconditionError(HeavytailError):
    """A theorem-scoped check was requested without its hypotheses being verified."""
