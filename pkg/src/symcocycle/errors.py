"""Exception hierarchy.

Validation errors (bad input, violated preconditions) map to CLI exit code 2;
numeric failures (degenerate data met during a computation) map to exit code 3.
"""


class ValidationError(ValueError):
    pass


class NumericFailure(ArithmeticError):
    pass


class InvalidDimensionError(ValidationError):
    pass


class PreconditionError(ValidationError):
    pass


class ConeViolationError(ValidationError):
    pass


class UndefinedAngleError(ValidationError):
    pass


class HorizonError(ValidationError):
    pass


class NotApplicableError(ValidationError):
    pass


class ParameterError(ValidationError):
    pass


class FormatError(ValidationError):
    pass


class SingularMatrixError(NumericFailure):
    pass


class DegeneratePairingError(NumericFailure):
    pass


class NoGapError(NumericFailure):
    pass


class ClassificationFailure(NumericFailure):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


class IntegrationError(NumericFailure):
    pass


class MemoryGuardError(NumericFailure):
    pass
