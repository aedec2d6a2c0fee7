"""Exception types shared across the package."""


class FracSPDEError(Exception):
    """Base class for all package errors."""


class DomainError(FracSPDEError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class NonConvergence(FracSPDEError, ArithmeticError):
    """A numerical method could not reach the requested accuracy."""


class DivergentIntegral(FracSPDEError, ArithmeticError):
    """The requested integral is infinite for the given parameters."""


class ConfigError(FracSPDEError, ValueError):
    """A configuration is inconsistent or invalid."""


class InsufficientResolution(FracSPDEError, ValueError):
    """A grid is too coarse for the requested estimator."""
