"""Numerical lab for Carleman weights and coefficient/initial-data stability
of a 2x2 reaction-diffusion system on an interval."""

from .errors import (ConfigurationError, ConstructionError, DomainError, PreconditionError,
                     ReconstructionError, SolverError)
from .grid import SpaceTimeField, SpatialGrid, SubIntervalSet, TimeGrid
from .scenario import ScenarioSpec, SineSeries, assumption_scenario
from .solver import BoundaryData, CoefficientSet, solve_forward
from .weights import CarlemanConfig, WeightSet, build_beta, validate_beta

__all__ = [
    "ConfigurationError", "ConstructionError", "DomainError", "PreconditionError",
    "ReconstructionError", "SolverError", "SpaceTimeField", "SpatialGrid", "SubIntervalSet",
    "TimeGrid", "ScenarioSpec", "SineSeries", "assumption_scenario", "BoundaryData",
    "CoefficientSet", "solve_forward", "CarlemanConfig", "WeightSet", "build_beta",
    "validate_beta",
]
