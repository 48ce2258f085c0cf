"""Shared exception types. At the CLI, ConfigError exits 2 and NumericalError exits 3."""


class ConfigError(ValueError):
    """Invalid configuration, malformed input file, or incompatible artifacts."""


class NumericalError(RuntimeError):
    """Non-finite values where finite numbers are required (divergence, NaN gradients)."""
