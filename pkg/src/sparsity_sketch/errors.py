"""Exception types raised across the package."""


class ParameterError(ValueError):
    """An argument is outside its admissible range."""


class DomainError(ValueError):
    """The input object is outside the domain of the quantity (e.g. x = 0)."""


class DegenerateSketchError(ArithmeticError):
    """A sketch statistic vanished, so the ratio estimator is undefined."""


class HypothesisViolationError(ValueError):
    """The confidence-interval hypothesis (width parameter < 1) fails."""

    def __init__(self, message, parameter=None, value=None):
        super().__init__(message)
        self.parameter = parameter
        self.value = value


class BudgetUndefinedError(ValueError):
    """The adaptive measurement rule is undefined because ceil(s) >= p."""


class InfeasibleError(ValueError):
    """The Basis Pursuit constraint set is empty."""


class NoNullSpaceError(ValueError):
    """The measurement matrix has full column rank."""


class ConstructionFailedError(RuntimeError):
    """The randomized dense-perturbation search ran out of retries."""

    def __init__(self, message, best_s=float("nan"), retries=0):
        super().__init__(message)
        self.best_s = best_s
        self.retries = retries
