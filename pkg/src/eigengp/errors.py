"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A numerical routine failed beyond recoverable safeguards."""


class FactorizationError(NumericalError):
    """Cholesky factorization failed even after jitter escalation."""


class ConditioningError(NumericalError):
    """Requested operation is numerically rank deficient."""


class UnsupportedKernelError(ValueError):
    """The kernel has no closed-form object of the requested kind."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""
