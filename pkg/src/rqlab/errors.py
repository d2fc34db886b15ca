"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class RQError(Exception):
    exit_code = 5


class InputError(RQError, ValueError):
    exit_code = 2


class DomainError(InputError):
    """Argument outside the mathematical domain of the operation."""


class MethodNotAvailable(InputError):
    pass


class CapacityError(RQError):
    exit_code = 3

    def __init__(self, message, reached=None):
        super().__init__(message)
        self.reached = reached


class NumericError(RQError, ArithmeticError):
    exit_code = 4


class InsufficientSignal(NumericError):
    pass
