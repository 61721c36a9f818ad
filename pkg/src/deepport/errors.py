"""Exception hierarchy.

Every error raised by the package derives from :class:`DeepPortError`. The
CLI maps the families below onto process exit codes.
"""


class DeepPortError(Exception):
    """Base class for all package errors."""


class ValidationError(DeepPortError, ValueError):
    """Bad configuration or violated precondition (exit code 1)."""


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(ValidationError):
    pass


class DataError(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class SplitError(ValidationError):
    pass


class SelectionError(ValidationError):
    pass


class ComparisonError(ValidationError):
    pass


class DivergenceError(DeepPortError, ArithmeticError):
    """Training produced a non-finite objective (exit code 3)."""

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class ConditioningError(DeepPortError, ArithmeticError):
    """Singular or numerically rank-deficient system (exit code 4)."""


class IterationLimitError(ConditioningError):
    def __init__(self, iterations, last_delta):
        self.iterations = iterations
        self.last_delta = last_delta
        super().__init__(
            f"no convergence after {iterations} sweeps (last max change {last_delta:.3e})"
        )
