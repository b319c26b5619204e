"""Exception types shared across the package."""


class AlabError(Exception):
    """Base class for all errors raised by alab."""


class InvalidPointError(AlabError, ValueError):
    pass


class DimensionMismatchError(AlabError, ValueError):
    pass


class ChartDegenerateError(AlabError, ValueError):
    pass


class IndeterminacyError(AlabError, ValueError):
    """The map vanishes on a lift; F is not a genuine endomorphism there."""


class UnsupportedError(AlabError, NotImplementedError):
    pass


class NumericalPreimageError(AlabError, RuntimeError):
    pass


class BudgetExceededError(AlabError, RuntimeError):
    pass


class CalibrationError(AlabError, RuntimeError):
    pass


class SearchFailedError(AlabError, RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class FitFailedError(AlabError, RuntimeError):
    def __init__(self, message, raw=None):
        super().__init__(message)
        self.raw = raw


class SingularEvaluationError(AlabError, RuntimeError):
    pass


class InfiniteSetError(AlabError, RuntimeError):
    """An exceptional set that should be finite has a positive-dimensional piece."""


class ConfigError(AlabError, ValueError):
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
