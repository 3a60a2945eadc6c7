"""Goal-conditioned hierarchical RL on grid-landmark graphs.

A high-level policy picks subgoals over a lattice graph whose edge costs
blend a learned low-level value with Euclidean distance; planning routes
around regions with high observed failure ratios; subgoal execution is
strict (a failed subgoal ends the episode), which keeps high-level learning
signals consistent and decision horizons short.
"""

from .config import ExperimentConfig, load_config
from .errors import ConfigError, OutOfBoundsError, PlannerError
from .geometry import Point, Rect
from .graph import LandmarkGraph, WaypointPath, hybrid_edge_cost, refined_cost
from .grid import GridPartition
from .high_level import (
    AugmentedState,
    HighPolicy,
    HighTransition,
    StuckDetector,
    execute_subgoal,
    next_decision_time,
)
from .low_level import ACTIONS, LowLearner, low_reward
from .mazes import BUILTIN_NAMES, EnvConfig, EnvState, PointMazeEnv, StepResult, TaskSpec, builtin_env, phi
from .replay import HighBuffer, LowReplay
from .training import IterationReport, Schedules, Trainer, choose_behavior_policy

__version__ = "0.1.0"

__all__ = [
    "ACTIONS",
    "AugmentedState",
    "BUILTIN_NAMES",
    "ConfigError",
    "EnvConfig",
    "EnvState",
    "ExperimentConfig",
    "GridPartition",
    "HighBuffer",
    "HighPolicy",
    "HighTransition",
    "IterationReport",
    "LandmarkGraph",
    "LowLearner",
    "LowReplay",
    "OutOfBoundsError",
    "PlannerError",
    "Point",
    "PointMazeEnv",
    "Rect",
    "Schedules",
    "StepResult",
    "StuckDetector",
    "TaskSpec",
    "Trainer",
    "WaypointPath",
    "builtin_env",
    "choose_behavior_policy",
    "execute_subgoal",
    "hybrid_edge_cost",
    "load_config",
    "low_reward",
    "next_decision_time",
    "phi",
    "refined_cost",
    "__version__",
]
