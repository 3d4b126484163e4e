"""Exception hierarchy shared by all modules."""


class StochHomError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(StochHomError, ValueError):
    """Invalid medium specification or run configuration."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class GeometryError(StochHomError, ValueError):
    """Inconsistent geometry: window too small, empty mask, mismatched grid."""


class NumericError(StochHomError, RuntimeError):
    """An iterative method failed to converge.

    ``residuals`` carries the best residual(s) reached before giving up.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class ContractError(StochHomError, ValueError):
    """A caller violated an operation precondition."""


class DomainError(StochHomError, ValueError):
    """Function evaluated outside its domain (e.g. the Zhikov function inside a band)."""
