"""Exception types raised across the package."""


class InvalidDesignError(ValueError):
    """A sampling design received parameters outside its domain."""


class EnumerationTooLargeError(ValueError):
    """Exact enumeration was requested for a population above the ceiling."""


class RejectionBudgetError(RuntimeError):
    """An accept-reject sampler exhausted its rejection budget."""

    def __init__(self, message, acceptance_rate=None):
        super().__init__(message)
        self.acceptance_rate = acceptance_rate


class SolverError(RuntimeError):
    """The canonical-parameter solver did not converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericInstabilityError(ArithmeticError):
    """A symmetric-function recursion lost all significant digits."""


class WeightUndefinedError(ValueError):
    """A sampled unit carries a zero inclusion probability."""


class IncompatibleDesignsError(ValueError):
    """Two designs are defined on populations of different sizes."""


class TrainingError(RuntimeError):
    """A learner failed to produce a finite model."""
