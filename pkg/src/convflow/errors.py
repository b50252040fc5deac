"""Exception hierarchy.

Each class carries the process exit code the command-line front end maps it to.
"""


class ConvFlowError(Exception):
    exit_code = 1


class InvalidSpecError(ConvFlowError, ValueError):
    """Malformed group specification or configuration."""

    exit_code = 2


class InvalidElementError(InvalidSpecError):
    pass


class AlgebraError(ConvFlowError, ValueError):
    """Operands live on different groups."""

    exit_code = 2


class DomainError(ConvFlowError, ValueError):
    """Argument outside the domain of an operation (time, coefficients, ...)."""

    exit_code = 2


class InvalidMeasureError(DomainError):
    pass


class DegenerateMeasureError(DomainError):
    pass


class CapacityError(ConvFlowError):
    exit_code = 3


class NumericalError(ConvFlowError, ArithmeticError):
    exit_code = 4


class InconclusiveError(NumericalError):
    pass
