"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid user-supplied parameter or input shape."""


class NumericalError(RuntimeError):
    """A numerical routine failed (non-convergence, breakdown)."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration limit.

    The best available estimate is attached so callers can still report it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InternalConsistencyError(RuntimeError):
    """An internal invariant was violated (indicates a bug or degenerate input)."""


class DegenerateInputError(ParameterError):
    """Input is formally valid but carries no usable information (e.g. a zero state)."""
