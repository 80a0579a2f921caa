"""Exception hierarchy shared by the solvers and the command line."""


class LLEError(Exception):
    """Base class for all solver failures raised by this package."""

    exit_code = 1


class DomainError(LLEError, ValueError):
    """An argument lies outside the domain where a formula is defined."""

    exit_code = 2


class TurningPoint(LLEError):
    """The trivial branch has a vertical tangent in the detuning."""

    exit_code = 1


class NoConvergence(LLEError):
    exit_code = 3

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularJacobian(LLEError):
    exit_code = 3


class FellBackToTrivial(LLEError):
    """Branch switching converged back onto a spatially constant state."""

    exit_code = 3


class StepUnderflow(LLEError):
    exit_code = 3


class Diverged(LLEError):
    exit_code = 5


class BackgroundFold(LLEError):
    exit_code = 4


class StageFailed(LLEError):
    """A stage of the soliton continuation pipeline could not be completed.

    Attributes
    ----------
    stage : str
        One of ``"f_tilde"``, ``"eps"``, ``"kappa"``.
    last_value : float
        Last parameter value at which a converged solution was available.
    """

    exit_code = 4

    def __init__(self, stage, last_value, message=""):
        super().__init__(
            message or f"stage {stage!r} failed after reaching {last_value:.6g}"
        )
        self.stage = stage
        self.last_value = last_value
