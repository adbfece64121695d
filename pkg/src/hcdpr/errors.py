"""Exception types raised across the package."""


class HCDPRError(Exception):
    """Base class for all package errors."""


class ConfigError(HCDPRError):
    """Configuration document could not be parsed."""


class ValidationError(HCDPRError):
    """A parameter violates a physical invariant."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class DegenerateGeometryError(HCDPRError):
    """A cable has (numerically) zero length."""


class WorkspaceError(HCDPRError):
    """Requested pose or cable lengths are outside the reachable workspace."""


class SingularConfigurationError(HCDPRError):
    """A matrix that must be full rank is not, or an angle is undefined."""


class ConstraintDegeneracyError(HCDPRError):
    """The lambda_1/lambda_2 elimination has a vanishing determinant."""


class InfeasibleTensionError(HCDPRError):
    """No tension vector on the admissible line satisfies the bounds."""

    def __init__(self, message: str, cables: list[int], intervals=None):
        super().__init__(message)
        self.cables = cables
        self.intervals = intervals


class SingularInertiaError(HCDPRError):
    """The inertia matrix could not be factorized."""


class DivergenceError(HCDPRError):
    """The simulated state blew up."""

    def __init__(self, t: float, channel: str, records=None):
        super().__init__(f"state diverged at t={t:.6g} s in channel {channel}")
        self.t = t
        self.channel = channel
        self.records = records
