"""Shared exception types."""


class ShapeMismatchError(ValueError):
    """Operand shapes incompatible for an op; message names the op kind."""


class DataValidationError(ValueError):
    """Malformed or inconsistent input data; message carries row/time context."""


class ConfigError(ValueError):
    """Invalid configuration value or combination."""


class TrainingDivergedError(RuntimeError):
    """Non-finite loss encountered during optimization."""
