"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised when a run configuration file is malformed or inconsistent."""


class NumericsError(RuntimeError):
    """Raised when a numerical routine fails (non-convergence, invariant breach)."""
