"""Stationary and time-dependent solutions of the Lugiato-Lefever equation
with two-photon absorption on the circle."""

from .errors import (
    BackgroundFold,
    DomainError,
    Diverged,
    FellBackToTrivial,
    LLEError,
    NoConvergence,
    SingularJacobian,
    StageFailed,
    StepUnderflow,
    TurningPoint,
)
from .model import FieldState, Params

__all__ = [
    "BackgroundFold",
    "DomainError",
    "Diverged",
    "FellBackToTrivial",
    "FieldState",
    "LLEError",
    "NoConvergence",
    "Params",
    "SingularJacobian",
    "StageFailed",
    "StepUnderflow",
    "TurningPoint",
]

__version__ = "0.1.0"
