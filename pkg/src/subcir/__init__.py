"""Subordinate CIR default-intensity model: spectral evaluation, local
characteristics, pricing and Monte Carlo validation."""

from .cir import Boundary, CirParams
from .errors import (BelowResolutionError, ConfigError, ConvergenceError, DomainError,
                     SubcirError)
from .model import QuadraturePolicy, SubCirModel, Truncation
from .subordinators import SubordinatorSpec, TemperedStable, TraceClass

__all__ = [
    "BelowResolutionError", "Boundary", "CirParams", "ConfigError", "ConvergenceError",
    "DomainError", "QuadraturePolicy", "SubCirModel", "SubcirError", "SubordinatorSpec",
    "TemperedStable", "TraceClass", "Truncation",
]
__version__ = "0.1.0"
