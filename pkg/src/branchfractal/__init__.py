"""Simulation and checking tools for random fractal point sets grown by branching."""

from .agora import AgoraConfig, AgoraStats, CountRadius, Model, PointTree, generate_discrete, min_dist
from .branching import BranchingTree, GrowthTrace, generate_tree, growth_exponent, next_child_time
from .dimension import DimFit, box_count, correlation_sum, energy_estimate, estimate_dimension, fit_dimension
from .profiles import ProcessParams, SpatialProfile, compute_cd, derive_params, params_from_rho, unit_ball_volume
from .spatial_index import PointIndex

__all__ = [
    "AgoraConfig", "AgoraStats", "BranchingTree", "CountRadius", "DimFit", "GrowthTrace", "Model",
    "PointIndex", "PointTree", "ProcessParams", "SpatialProfile", "box_count", "compute_cd",
    "correlation_sum", "derive_params", "energy_estimate", "estimate_dimension", "fit_dimension",
    "generate_discrete", "generate_tree", "growth_exponent", "min_dist", "next_child_time",
    "params_from_rho", "unit_ball_volume",
]
