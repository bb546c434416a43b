"""Exception types raised by moqa."""


class MOQAError(Exception):
    """Base class for all library errors."""


class ValidationError(MOQAError, ValueError):
    """Malformed input: wrong shape, asymmetric matrix, bad parameter."""


class SymmetryError(ValidationError):
    """A matrix that must be symmetric is not."""


class ConvergenceError(MOQAError, ArithmeticError):
    """An iterative eigen-solve did not reach tolerance.

    Attributes
    ----------
    residual : float
        Residual norm of the last iterate.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ResourceBudgetError(MOQAError):
    """A computation would exceed its configured size budget."""


class NumericRangeError(MOQAError, ArithmeticError):
    """A coefficient overflowed to a non-finite value."""


class PreconditionError(MOQAError):
    """An operation was called on input violating its precondition."""
