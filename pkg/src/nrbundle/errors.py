"""Exception types raised across the package."""


class NrBundleError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(NrBundleError, ValueError):
    pass


class InvalidStateError(NrBundleError, ValueError):
    pass


class SingularConfigurationError(NrBundleError, ArithmeticError):
    pass


class InfeasibleParametersError(NrBundleError, ValueError):
    pass


class NonUniqueSteadyStateError(NrBundleError, ArithmeticError):
    pass


class UndefinedCorrelationError(NrBundleError, ArithmeticError):
    """Raised when a correlation function has a vanishing normalization."""


class IntegratorError(NrBundleError, RuntimeError):
    pass


class ConfigError(NrBundleError, ValueError):
    """Invalid scenario configuration; ``path`` names the offending key."""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
