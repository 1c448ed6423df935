"""Exception hierarchy shared by all curveflow modules."""


class CurveflowError(Exception):
    """Base class for every error raised by curveflow."""


class ConfigError(CurveflowError):
    """Invalid or inconsistent configuration (CLI exit status 2)."""


class DomainError(CurveflowError, ValueError):
    """A curvature vector lies outside the cone of the function."""


class DegenerateEigenvaluesError(CurveflowError, ValueError):
    """Two eigenvalues are closer than the admissible gap."""


class EigenDecompositionError(CurveflowError, ArithmeticError):
    """The symmetric eigensolver failed (non-finite input or no convergence)."""


class InvalidRangeError(CurveflowError, ValueError):
    pass


class NonpositiveSpeedError(CurveflowError, ValueError):
    pass


class NonpositiveG2Error(ConfigError):
    """g2 = M*sum(z) - |z| is not positive: M is too small for the cone."""


class ConeUnboundedError(ConfigError):
    """|z|/sum(z) diverges on the cone; no finite M exists."""


class InfeasibleError(CurveflowError):
    """No (gamma_eps, gamma_delta) on the fitting grid satisfies all samples."""

    def __init__(self, message, worst=None):
        super().__init__(message)
        self.worst = worst


class CFLViolation(CurveflowError):
    pass


class ConeExitError(CurveflowError):
    """A grid point's curvature left the admissible cone."""

    def __init__(self, message, index=None, t=None):
        super().__init__(message)
        self.index = index
        self.t = t


class DegenerateRadiusError(CurveflowError):
    """The profile radius fell below the floor (near the singular time)."""

    def __init__(self, message, index=None, t=None):
        super().__init__(message)
        self.index = index
        self.t = t
