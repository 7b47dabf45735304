"""Error types shared by the library and mapped to CLI exit codes."""


class ScalarCurvError(Exception):
    exit_code = 2


class SpecError(ScalarCurvError):
    """Malformed input; the message names the offending field."""

    exit_code = 1


class DomainError(ScalarCurvError, ValueError):
    """A mathematical precondition does not hold."""

    exit_code = 2


class ConvergenceError(ScalarCurvError, RuntimeError):
    """An iteration hit its cap.  ``last`` carries the final iterate or residual."""

    exit_code = 3

    def __init__(self, message: str, last=None):
        super().__init__(message)
        self.last = last
