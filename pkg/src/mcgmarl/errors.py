"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes do not conform; the message names both shapes."""


class StateError(RuntimeError):
    """Operation called in an illegal order (backward before forward, step after terminal)."""


class NumericError(ArithmeticError):
    """A value that must be finite is not, or training diverged."""


class ConfigError(ValueError):
    """Invalid or unknown configuration; carries the offending key when known."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class CheckpointError(RuntimeError):
    """Checkpoint file is corrupt or does not match the expected format."""
