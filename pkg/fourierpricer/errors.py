"""Exception hierarchy shared by every pricing module.

Validation problems map to CLI exit code 2, numerical failures to exit code 3.
"""


class PricingError(Exception):
    """base class for all fourierpricer errors"""

    exit_code = 1


class ValidationError(PricingError, ValueError):
    """invalid input or configuration"""

    exit_code = 2


class DomainError(ValidationError):
    """model or market parameters outside their admissible region"""


class UnsupportedModelError(ValidationError):
    """operation not defined for the given model"""


class DegenerateMaturityError(ValidationError):
    """zero maturity where the formula divides by sqrt(T)"""


class GridTooCoarseError(ValidationError):
    def __init__(self, message: str, minimal_n: int):
        super().__init__(message)
        self.minimal_n = minimal_n


class DivisionGuardError(ValidationError):
    """zero denominator in a relative error"""


class NumericError(PricingError, ArithmeticError):
    """numerical failure during evaluation"""

    exit_code = 3


class NumericOverflowError(NumericError):
    """non-finite intermediate value"""


class QuadratureDiagnosticError(NumericError):
    def __init__(self, message: str, B: float, N: int, value: float):
        super().__init__(message)
        self.B = B
        self.N = N
        self.value = value


class ExhaustedGridError(NumericError):
    def __init__(self, message: str, best_error_bps: float):
        super().__init__(message)
        self.best_error_bps = best_error_bps


class DivergenceError(NumericError):
    def __init__(self, message: str, epoch: int, learning_rate: float):
        super().__init__(message)
        self.epoch = epoch
        self.learning_rate = learning_rate
