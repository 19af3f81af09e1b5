"""Exception and warning types shared across playerchurn"""
from typing import Optional


class ChurnError(Exception):
    """Base class for playerchurn failures"""


class DataError(ChurnError, ValueError):
    """Input data cannot be used (bad rows, empty cohorts, malformed files)"""


class ParseError(DataError):
    """A trace row failed validation"""

    def __init__(self, reason: str, line_number: Optional[int] = None, path: Optional[str] = None):
        self.reason = reason
        self.line_number = line_number
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line_number is not None:
            where += f"{line_number}: "
        elif where:
            where += " "
        super().__init__(f"{where}{reason}")


class UndefinedRatioError(ChurnError, ArithmeticError):
    """RMST ratio with a zero-area denominator"""


class DegenerateTestError(ChurnError, ArithmeticError):
    """Log-rank statistic with zero total variance"""


class ConvergenceWarning(UserWarning):
    """An iterative fit stopped at its iteration cap"""

    def __init__(self, message: str, gradient_norm: float, iterations: int):
        super().__init__(f"{message} (iterations={iterations}, gradient_norm={gradient_norm:.3e})")
        self.gradient_norm = gradient_norm
        self.iterations = iterations
