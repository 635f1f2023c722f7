"""Stochastic heat equations with fractional Laplacian and Poisson noise."""

from .errors import (ConvergenceError, DivergenceError, ExistenceGateError, LevyHeatError,
                     NumericalError, QuadratureError, ValidationError)
from .kernel import KernelHandle, LevySymbolSpec
from .measure import LevyMeasureSpec, PointCloud, SpaceTimeWindow, sample_prm
from .scenario import Scenario
from .seeding import derive_seed

__all__ = [
    "ConvergenceError", "DivergenceError", "ExistenceGateError", "LevyHeatError",
    "NumericalError", "QuadratureError", "ValidationError", "KernelHandle", "LevySymbolSpec",
    "LevyMeasureSpec", "PointCloud", "SpaceTimeWindow", "sample_prm", "Scenario", "derive_seed",
]
