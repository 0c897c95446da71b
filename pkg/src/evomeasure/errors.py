"""Exception types shared across modules."""


class ConfigError(ValueError):
    """A run configuration failed validation (CLI exit code 2)."""


class NumericError(RuntimeError):
    """A solver produced NaN/overflow or lost positivity (CLI exit code 3)."""
