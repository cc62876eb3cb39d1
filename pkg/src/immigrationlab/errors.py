"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid model parameters or experiment configuration."""


class DomainError(ValueError):
    """An argument lies outside the region where the operation is defined."""


class ResourceError(RuntimeError):
    """A requested simulation would exceed the configured size cap."""


class NumericError(ArithmeticError):
    """A numerical routine failed to reach its target accuracy.

    ``estimate`` carries the best value obtained before giving up.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class DegenerateScaleError(NumericError):
    """The normalising scale sqrt(c t^rho v(t)) vanishes."""


class ConsistencyError(NumericError):
    """A computed object violates an invariant it must satisfy by construction."""
