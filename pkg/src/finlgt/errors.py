"""Exception types raised across the package."""


class LGTError(Exception):
    """Base class for all package errors."""


class InvalidOrderError(LGTError, ValueError):
    pass


class NotCyclicError(LGTError, ValueError):
    pass


class OrderTooSmallError(LGTError, ValueError):
    pass


class GroupAxiomError(LGTError, ValueError):
    pass


class RepresentationError(LGTError, ValueError):
    pass


class DegenerateSpectrumError(LGTError, ArithmeticError):
    """Raised when the weighted average matrix has operator norm 1."""


class InvalidPairError(LGTError, ValueError):
    pass


class DegreeError(LGTError, ValueError):
    pass


class NotACycleError(LGTError, ValueError):
    pass


class NotClosedError(LGTError, ValueError):
    pass


class BudgetError(LGTError, RuntimeError):
    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class PreconditionError(LGTError, ValueError):
    pass


class ConditioningOnNullError(LGTError, ZeroDivisionError):
    pass


class WrongRegimeError(LGTError, ValueError):
    pass


class NormalizationError(LGTError, ValueError):
    pass


class ConfigError(LGTError, ValueError):
    pass
