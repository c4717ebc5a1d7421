"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class StepSizeError(RuntimeError):
    """Explicit step rejected because the CFL restriction is violated."""


class ResourceError(RuntimeError):
    """Run would exceed the step/iteration budget."""


class DimensionError(ValueError):
    """Operation not available in the requested spatial dimension."""
