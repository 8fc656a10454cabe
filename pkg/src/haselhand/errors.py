"""Exception types shared across the simulator and control stack."""


class HaselHandError(Exception):
    """Base class for all package errors."""


class DomainError(HaselHandError, ValueError):
    """An input lies outside the physical domain of an operation."""


class ConfigError(HaselHandError, ValueError):
    """A configuration value or reference is invalid."""


class TraceSchemaError(ConfigError):
    """A trace file does not match the expected column schema."""

    def __init__(self, message: str, column: str | None = None):
        super().__init__(message)
        self.column = column


class ModelConsistencyError(HaselHandError, RuntimeError):
    """The model contradicted one of its own assumptions (e.g. a
    residual that should be monotone was not)."""


class CalibrationError(HaselHandError, RuntimeError):
    """Threshold calibration failed because the signal classes overlap.

    Carries the two class extrema so callers can report the margin.
    """

    def __init__(self, min_free: float, max_grasp: float):
        super().__init__(
            f"no separating threshold: min free-motion current "
            f"{min_free:.4f} uA <= max grasp current {max_grasp:.4f} uA"
        )
        self.min_free = min_free
        self.max_grasp = max_grasp


class InsufficientDataError(HaselHandError, ValueError):
    """A signal is too short to evaluate over the configured window."""


class BaselineExhaustedError(HaselHandError, RuntimeError):
    """The controller ran past the end of its baseline while still ramping."""
