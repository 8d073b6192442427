"""System identification and trajectory optimisation for a quadrotor-carried vine robot."""

from .core import (
    CORNERS,
    DT,
    Trajectory,
    VineConfig,
    augment,
    mean_euclidean_distance,
    parse_config,
    rest_state,
)
from .model import CornerSet, DynModel, interpolate, jacobians, predict, rollout
from .sysid import build_dataset, fit_config_model, fit_linear, fit_tip_height, quadratic_features
from .trajopt import Equality, SolverOptions, TrajOptProblem, solve

__version__ = "0.1.0"
