"""Numerical companion for cylindrical estimates of fully non-linear curvature flows.

Modules:

* :mod:`curveflow.symfun` - speed functions and their spectral matrix lifts;
* :mod:`curveflow.pinch` - the pinching functions g1 and g = g1^2 / g2;
* :mod:`curveflow.ineq` - gradient-term decomposition and sign verifiers;
* :mod:`curveflow.flow` - rotationally symmetric flow simulation and monitors;
* :mod:`curveflow.cli` - the ``curveflow`` command.
"""

from .errors import (
    CFLViolation,
    ConeExitError,
    ConeUnboundedError,
    ConfigError,
    CurveflowError,
    DegenerateEigenvaluesError,
    DegenerateRadiusError,
    DomainError,
    EigenDecompositionError,
    InfeasibleError,
    InvalidRangeError,
    NonpositiveG2Error,
    NonpositiveSpeedError,
)
from .kernels import BACKEND
from .pinch import PinchingConfig, PinchingFunction, PreliminaryPinching
from .symfun import ConeSpec, SpectralDerivatives, SpeedFunction

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CFLViolation",
    "ConeExitError",
    "ConeSpec",
    "ConeUnboundedError",
    "ConfigError",
    "CurveflowError",
    "DegenerateEigenvaluesError",
    "DegenerateRadiusError",
    "DomainError",
    "EigenDecompositionError",
    "InfeasibleError",
    "InvalidRangeError",
    "NonpositiveG2Error",
    "NonpositiveSpeedError",
    "PinchingConfig",
    "PinchingFunction",
    "PreliminaryPinching",
    "SpectralDerivatives",
    "SpeedFunction",
]
