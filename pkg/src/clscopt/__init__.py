"""Multi-objective closed-loop supply chain network design under demand uncertainty."""

from .model import (
    FORBIDDEN,
    FeasibilityReport,
    NetworkInstance,
    ObjectiveVector,
    Solution,
    check_feasibility,
    evaluate,
    load_instance,
    validate_instance,
)
from .moga import GaConfig, decode, run_nsga2
from .pareto import ParetoFront, coverage, hypervolume
from .scalarize import NormalizationBounds, WeightVector, compute_bounds, solve_weighted_exact, sweep_weights

__version__ = "0.1.0"

__all__ = [
    "FORBIDDEN",
    "FeasibilityReport",
    "GaConfig",
    "NetworkInstance",
    "NormalizationBounds",
    "ObjectiveVector",
    "ParetoFront",
    "Solution",
    "WeightVector",
    "check_feasibility",
    "compute_bounds",
    "coverage",
    "decode",
    "evaluate",
    "hypervolume",
    "load_instance",
    "run_nsga2",
    "solve_weighted_exact",
    "sweep_weights",
    "validate_instance",
]
