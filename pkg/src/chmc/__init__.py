"""Constant harmonic mean curvature surfaces in asymptotically Schwarzschild spaces."""

from .ambient import AmbientMetric, PerturbationSpec
from .errors import (AssemblyError, BandExitError, CHMCError, ConfigError, DiscretizationError,
                     DomainError, FlowInstabilityError, LadderError, NumericError,
                     UndefinedCurvatureError)
from .surface import Surface, make_coordinate_sphere

__all__ = [
    "AmbientMetric", "PerturbationSpec", "Surface", "make_coordinate_sphere",
    "CHMCError", "DomainError", "NumericError", "DiscretizationError", "UndefinedCurvatureError",
    "FlowInstabilityError", "BandExitError", "AssemblyError", "ConfigError",
    "LadderError",
]
