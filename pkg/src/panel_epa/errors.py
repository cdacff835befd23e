"""Exception hierarchy. The CLI maps each family to an exit code."""


class EPAError(Exception):
    """Base class for all package errors."""


class InputError(EPAError, ValueError):
    """Malformed or inconsistent input data (exit code 2)."""


class NumericalError(EPAError, ArithmeticError):
    """A statistic is undefined for the given data (exit code 3)."""


class DegenerateVarianceError(NumericalError):
    pass


class SingularCovarianceError(NumericalError):
    pass


class IndefiniteCovarianceError(NumericalError):
    pass


class InfeasibleTestError(EPAError):
    """The requested test cannot be computed for these dimensions (exit code 4)."""
