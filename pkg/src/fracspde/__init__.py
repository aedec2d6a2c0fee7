"""Moments, regimes and simulation for fractional stochastic equations with rough noise."""
from .errors import (ConfigError, DivergentIntegral, DomainError, FracSPDEError,
                     InsufficientResolution, NonConvergence)
from .params import ModelParams, spectral_constant

__all__ = ["ModelParams", "spectral_constant", "FracSPDEError", "DomainError", "NonConvergence",
           "DivergentIntegral", "ConfigError", "InsufficientResolution"]
__version__ = "0.1.0"
