"""Exception hierarchy shared by all modules.

The CLI maps :class:`ParameterError` and :class:`ModelError` to exit code 2
and :class:`NumericError` to exit code 3.
"""


class MfwsnError(Exception):
    """Base class for all package errors."""


class ParameterError(MfwsnError, ValueError):
    """A parameter lies outside its admissible domain."""


class ModelError(MfwsnError, ValueError):
    """A model file or component violates a structural invariant."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


class NumericError(MfwsnError, ArithmeticError):
    """A numerical routine failed to reach its tolerance."""

    def __init__(self, message, error_estimate=None, time=None):
        super().__init__(message)
        self.error_estimate = error_estimate
        self.time = time


class StiffnessError(NumericError):
    """The ODE integrator's step size underflowed."""


class UnresolvedFixpoint(NumericError):
    """Newton refinement did not converge; ``tail`` holds the last trajectory points."""

    def __init__(self, message, tail=None):
        super().__init__(message)
        self.tail = tail
