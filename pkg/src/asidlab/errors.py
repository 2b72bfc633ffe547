"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inconsistent environment, policy, or experiment configuration."""


class DomainError(ValueError):
    """Numerical input outside the domain of an operation (NaN state, T <= 0, ...)."""


class OptimizationError(RuntimeError):
    """Raised by the black-box optimizer when no candidate can be scored."""


class EpisodeBudgetExceeded(RuntimeError):
    """The real environment has already produced its single episode."""
