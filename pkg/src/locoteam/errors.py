"""Exception types shared across the package."""


class LocoteamError(Exception):
    """Base class for package errors."""


class SingularityError(LocoteamError):
    """Euler-angle kinematics evaluated too close to gimbal lock."""


class IntegrationError(LocoteamError):
    """Implicit integration step failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class LinearizationError(LocoteamError):
    """Implicit-step Jacobian could not be formed (singular system)."""


class SolverError(LocoteamError):
    """Trajectory optimization subproblem failed."""


class ConfigError(LocoteamError):
    """Scenario configuration is missing, malformed, or inconsistent."""


class ConfigParseError(ConfigError):
    """Scenario file could not be parsed."""


class ConfigValidationError(ConfigError):
    """Scenario contents violate a validation rule."""
