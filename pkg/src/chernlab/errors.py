"""Exception hierarchy shared by all chernlab modules."""


class ChernLabError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(ChernLabError, ValueError):
    pass


class DomainError(ChernLabError, ValueError):
    """Argument lies outside the domain where an operation is defined."""


class InvalidHypothesisError(ChernLabError, ValueError):
    pass


class PreconditionError(ChernLabError, ValueError):
    pass


class InfeasibleWindowError(ChernLabError):
    """No feasibility threshold was found inside the search window."""


class InfeasibleError(ChernLabError):
    pass


class SignError(ChernLabError, ValueError):
    """A curvature profile has the wrong sign for the requested construction."""


class SingularSystemError(ChernLabError):
    pass


class ContinuityError(ChernLabError):
    pass


class InvalidGluingError(ChernLabError):
    pass


class ConstructionError(ChernLabError):
    pass


class SingularMetricError(ChernLabError, ValueError):
    pass


class NonConvergenceError(ChernLabError):
    """Raised when an iteration exhausts its budget.

    ``trace`` holds the per-iteration sup-norm changes recorded so far.
    """

    def __init__(self, message, trace=None, index=None):
        super().__init__(message)
        self.trace = list(trace or [])
        self.index = index


class InvalidBarrierError(ChernLabError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index
