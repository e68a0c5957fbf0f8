"""Exception types shared across the package."""


class BubbleChanError(Exception):
    """Base class for all package errors."""


class ParameterError(BubbleChanError, ValueError):
    """An argument or configuration value is out of range."""


class DomainError(BubbleChanError, ValueError):
    """A special function was evaluated outside its domain."""


class BracketError(BubbleChanError, ValueError):
    """Root search interval does not contain a sign change."""


class ConvergenceError(BubbleChanError, ArithmeticError):
    """Numerical procedure did not reach the requested accuracy.

    ``estimate`` and ``error`` carry the best value obtained so far.
    """

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class FitError(BubbleChanError, ArithmeticError):
    """Method-of-moments equation has no admissible solution."""

    def __init__(self, message, moment_ratio=float("nan")):
        super().__init__(message)
        self.moment_ratio = moment_ratio


class DegenerateDataError(BubbleChanError, ValueError):
    """Data has no spread, so the requested statistic is undefined."""
