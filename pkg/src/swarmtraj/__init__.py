"""Decentralized multi-robot trajectory planning with closed-form peer prediction.

Modules:

* :mod:`~swarmtraj.trajectory`: quintic trajectories and their exact integrals
* :mod:`~swarmtraj.predictor`: minimum time-jerk prediction of peer trajectories
* :mod:`~swarmtraj.planner`: collision-aware quintic planning with free end time
* :mod:`~swarmtraj.swarm`: receding-horizon fleet simulation and metrics
* :mod:`~swarmtraj.scenario`, :mod:`~swarmtraj.outputs`, :mod:`~swarmtraj.cli`:
  scenario files, run artifacts and the command line
"""

from .planner import (
    CollisionMode,
    DynamicLimits,
    GoalMode,
    GoalSpec,
    Obstacle,
    PlannerWeights,
    PlanResult,
    SolverSettings,
    plan,
)
from .predictor import PredictionMethod, PredictionResult, PredictorSettings, predict
from .scenario import ScenarioConfig, ScenarioError, load_scenario, parse_scenario
from .swarm import RobotAgent, SimConfig, SimLog, Swarm, metrics, run
from .trajectory import QuinticTrajectory, RobotState

__all__ = [
    "CollisionMode", "DynamicLimits", "GoalMode", "GoalSpec", "Obstacle", "PlannerWeights",
    "PlanResult", "SolverSettings", "plan",
    "PredictionMethod", "PredictionResult", "PredictorSettings", "predict",
    "ScenarioConfig", "ScenarioError", "load_scenario", "parse_scenario",
    "RobotAgent", "SimConfig", "SimLog", "Swarm", "metrics", "run",
    "QuinticTrajectory", "RobotState",
]
