"""Exception hierarchy shared by the library and the CLI."""


class JSRError(Exception):
    """Base class for all errors raised by jsrcert."""


class DimensionError(JSRError, ValueError):
    """Matrices of incompatible shapes were combined."""


class InvalidMatrixError(JSRError, ValueError):
    """A matrix is not square, not finite, or otherwise malformed."""


class ConvergenceError(JSRError, ArithmeticError):
    """An iterative solver hit its iteration cap."""


class SingularMatrixError(JSRError, ArithmeticError):
    """A matrix that must be inverted is numerically singular."""


class AsymmetricMatrixError(JSRError, ValueError):
    """The symmetric eigen-solver received a non-symmetric matrix."""


class WordError(JSRError, ValueError):
    """A word is empty or uses a letter outside the alphabet."""


class BudgetExceededError(JSRError, RuntimeError):
    """An enumeration would exceed the configured word budget."""

    def __init__(self, needed: int, budget: int, what: str = "enumeration"):
        self.needed = needed
        self.budget = budget
        super().__init__(f"{what} needs {needed} words, exceeding budget={budget}")


class ConditionKError(JSRError, ValueError):
    """Kozyakin parameters violate condition (K)."""

    def __init__(self, inequality: str):
        self.inequality = inequality
        super().__init__(f"{inequality} violated")


class CrossValidationError(JSRError, RuntimeError):
    """A certificate disagrees with independently computed bounds."""

    def __init__(self, criterion: str, value: float, lower: float, upper: float, detail: str = ""):
        self.criterion = criterion
        self.value = value
        self.lower = lower
        self.upper = upper
        msg = (f"{criterion} certificate value {value!r} disagrees with "
               f"bounds [{lower!r}, {upper!r}]")
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class DocumentError(JSRError, ValueError):
    """A set or report document fails schema validation."""
