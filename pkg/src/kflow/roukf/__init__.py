"""Reduced-Order Unscented Kalman Filter."""

from kflow.roukf.filter import (
    EstimationConfig,
    EstimateTrajectory,
    FilterDivergence,
    FilterState,
    estimate_run,
    filter_init,
    filter_step,
)
from kflow.roukf.innovations import (
    CoilSpec,
    InnovationSpec,
    innovation_kspace,
    innovation_velocity,
    innovation_wrapped,
    stack_coils,
)
from kflow.roukf.reparam import ParameterSet, reparam_to_physical
from kflow.roukf.sigma_points import canonical_sigma_points

__all__ = [
    "canonical_sigma_points",
    "ParameterSet",
    "reparam_to_physical",
    "InnovationSpec",
    "CoilSpec",
    "innovation_velocity",
    "innovation_wrapped",
    "innovation_kspace",
    "stack_coils",
    "FilterState",
    "FilterDivergence",
    "EstimationConfig",
    "EstimateTrajectory",
    "filter_init",
    "filter_step",
    "estimate_run",
]
