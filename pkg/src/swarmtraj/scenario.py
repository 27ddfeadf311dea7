"""Scenario files: parsing, validation and canonical serialization.

A scenario is a YAML mapping::

    dimension: 3                 # optional, default 3
    seed: 7                      # optional, used by random_spawn
    robots:                      # explicit robots ...
      - id: 0
        radius: 0.3
        p0: [-2, 0, 1]
        v0: [0, 0, 0]            # optional, default zeros
        a0: [0, 0, 0]            # optional, default zeros
        goals:
          - {p_end: [2, 0, 1], mode: full_rest}   # mode defaults to position_only
    random_spawn:                # ... or generated ones (seeded)
      count: 6
      radius: 0.3
      low: [-3, -3, 1]
      high: [3, 3, 3]
      min_spacing: 1.0
      goal_mode: full_rest
    weights: {q_dynm, q_obs, q_lim, k_t, k_p, collision_sign, collision_mode}
    limits: {vel, acc, jerk}
    sim: {dt_sim, replan_hz, duration_max, goal_switch_tolerance, parallel_replan,
          sample_log_dt, comm_delay_ticks, rest_approach_distance}
    solver: {max_iter, grad_tol, quad_nodes, quad_panels, t_min, j_nominal, q_end, tie_break_offset}

Every section except ``robots``/``random_spawn`` is optional and falls back to
the library defaults.  ``solver.q_end`` is the end-constraint penalty and is
stored with the planner weights; ``solver.j_nominal`` defaults to twice the
jerk limit.  Unknown keys are errors, and every error names the offending
path (``robots[0].radius``).
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import yaml

from . import predictor
from .planner import (
    CollisionMode,
    DynamicLimits,
    GoalMode,
    GoalSpec,
    Obstacle,
    PlannerWeights,
    SolverSettings,
)
from .predictor import T_MIN, PredictorSettings
from .swarm import RobotAgent, SimConfig
from .trajectory import QuinticTrajectory, RobotState


class ScenarioError(ValueError):
    """Invalid scenario; ``path`` locates the offending entry."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class GoalConfig:
    p_end: tuple[float, ...]
    mode: GoalMode = GoalMode.POSITION_ONLY


@dataclass(frozen=True)
class RobotConfig:
    id: int
    radius: float
    p0: tuple[float, ...]
    v0: tuple[float, ...]
    a0: tuple[float, ...]
    goals: tuple[GoalConfig, ...]


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = SolverSettings.max_iter
    grad_tol: float = SolverSettings.grad_tol
    quad_nodes: int = SolverSettings.quad_nodes
    quad_panels: int = SolverSettings.quad_panels
    t_min: float = T_MIN
    j_nominal: float = PredictorSettings.j_nominal
    q_end: float = PlannerWeights.q_end
    tie_break_offset: float = SolverSettings.tie_break_offset


@dataclass(frozen=True)
class ScenarioConfig:
    dimension: int
    robots: tuple[RobotConfig, ...]
    weights: PlannerWeights = field(default_factory=PlannerWeights)
    limits: DynamicLimits = field(default_factory=DynamicLimits)
    sim: SimConfig = field(default_factory=SimConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int | None = None

    def agents(self) -> list[RobotAgent]:
        """Fresh simulation agents for this scenario."""
        settings = SolverSettings(
            max_iter=self.solver.max_iter, grad_tol=self.solver.grad_tol,
            quad_nodes=self.solver.quad_nodes, quad_panels=self.solver.quad_panels,
            t_min=self.solver.t_min,
            tie_break_offset=self.solver.tie_break_offset)
        pred = PredictorSettings(t_min=self.solver.t_min, j_nominal=self.solver.j_nominal)
        out = []
        for r in self.robots:
            out.append(RobotAgent(
                id=r.id, radius=r.radius, state=RobotState(r.p0, r.v0, r.a0),
                goal_queue=[GoalSpec(g.p_end, g.mode) for g in r.goals],
                weights=self.weights, limits=self.limits, solver=settings,
                predictor_settings=pred))
        return out

    def to_dict(self) -> dict:
        """Canonical plain-data form; :func:`parse_scenario` of its YAML is equal to ``self``."""
        weights = asdict(self.weights)
        weights.pop("q_end")
        weights["collision_mode"] = self.weights.collision_mode.value
        out = {
            "dimension": self.dimension,
            "robots": [
                {"id": r.id, "radius": r.radius, "p0": list(r.p0), "v0": list(r.v0),
                 "a0": list(r.a0),
                 "goals": [{"p_end": list(g.p_end), "mode": g.mode.value} for g in r.goals]}
                for r in self.robots
            ],
            "weights": weights,
            "limits": asdict(self.limits),
            "sim": asdict(self.sim),
            "solver": {**asdict(self.solver), "q_end": self.weights.q_end},
        }
        if self.seed is not None:
            out["seed"] = self.seed
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)


# -- value checkers ---------------------------------------------------------

def _mapping(value, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ScenarioError(path, "expected a mapping")
    return value


def _check_keys(data: dict, allowed, path: str):
    for key in data:
        if key not in allowed:
            where = f"{path}.{key}" if path else str(key)
            raise ScenarioError(where, "unknown key")


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ScenarioError(path, "must be finite")
    return value


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(path, f"expected an integer, got {value!r}")
    return value


def _boolean(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ScenarioError(path, f"expected true or false, got {value!r}")
    return value


def _vector(value, dim: int, path: str) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)):
        raise ScenarioError(path, "expected a list of numbers")
    if len(value) != dim:
        raise ScenarioError(path, f"expected {dim} components, got {len(value)}")
    return tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(value))


def _required(data: dict, key: str, path: str):
    if key not in data:
        raise ScenarioError(f"{path}.{key}" if path else key, "missing required key")
    return data[key]


def _section(data: dict, key: str, cls, converters: dict, extra: dict | None = None):
    """Build dataclass ``cls`` from ``data[key]`` with per-field converters."""
    raw = _mapping(data.get(key), key)
    _check_keys(raw, converters, key)
    kwargs = {name: conv(raw[name], f"{key}.{name}") for name, conv in converters.items()
              if name in raw}
    kwargs.update(extra or {})
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ScenarioError(key, str(exc)) from None


def _goal_mode(value, path: str) -> GoalMode:
    try:
        return GoalMode(value)
    except ValueError:
        choices = ", ".join(m.value for m in GoalMode)
        raise ScenarioError(path, f"mode must be one of {choices}") from None


def _collision_mode(value, path: str) -> CollisionMode:
    try:
        return CollisionMode(value)
    except ValueError:
        choices = ", ".join(m.value for m in CollisionMode)
        raise ScenarioError(path, f"collision_mode must be one of {choices}") from None


# -- sections ---------------------------------------------------------------

_ROBOT_KEYS = ("id", "radius", "p0", "v0", "a0", "goals")
_GOAL_KEYS = ("p_end", "mode")
_SPAWN_KEYS = ("count", "radius", "low", "high", "min_spacing", "goal_mode")


def _parse_robot(raw, dim: int, path: str) -> RobotConfig:
    raw = _mapping(raw, path)
    _check_keys(raw, _ROBOT_KEYS, path)
    rid = _integer(_required(raw, "id", path), f"{path}.id")
    radius = _number(_required(raw, "radius", path), f"{path}.radius")
    if not radius > 0:
        raise ScenarioError(f"{path}.radius", "must be positive")
    p0 = _vector(_required(raw, "p0", path), dim, f"{path}.p0")
    zeros = [0.0] * dim
    v0 = _vector(raw.get("v0", zeros), dim, f"{path}.v0")
    a0 = _vector(raw.get("a0", zeros), dim, f"{path}.a0")
    goals_raw = _required(raw, "goals", path)
    if not isinstance(goals_raw, list) or not goals_raw:
        raise ScenarioError(f"{path}.goals", "expected a non-empty list")
    goals = []
    for j, g in enumerate(goals_raw):
        gpath = f"{path}.goals[{j}]"
        g = _mapping(g, gpath)
        _check_keys(g, _GOAL_KEYS, gpath)
        p_end = _vector(_required(g, "p_end", gpath), dim, f"{gpath}.p_end")
        mode = _goal_mode(g.get("mode", GoalMode.POSITION_ONLY.value), f"{gpath}.mode")
        goals.append(GoalConfig(p_end, mode))
    return RobotConfig(rid, radius, p0, v0, a0, tuple(goals))


def random_spawn(count: int, low, high, min_spacing: float, seed: int | None,
                 max_tries: int = 10000):
    """Seeded uniform starts and goals in a box, each set ``min_spacing`` apart.

    Returns ``(starts, goals)`` arrays of shape ``(count, N)``.  Raises
    ``ValueError`` when the box is too crowded to place everyone.
    """
    rng = np.random.default_rng(seed)
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)

    def draw():
        pts = []
        tries = 0
        while len(pts) < count:
            tries += 1
            if tries > max_tries:
                raise ValueError(f"could not place {count} points {min_spacing} apart")
            p = rng.uniform(low, high)
            if all(np.linalg.norm(p - q) >= min_spacing for q in pts):
                pts.append(p)
        return np.array(pts)

    return draw(), draw()


def _parse_spawn(raw, dim: int, seed: int | None) -> list[RobotConfig]:
    path = "random_spawn"
    raw = _mapping(raw, path)
    _check_keys(raw, _SPAWN_KEYS, path)
    count = _integer(_required(raw, "count", path), f"{path}.count")
    if count < 1:
        raise ScenarioError(f"{path}.count", "must be at least 1")
    radius = _number(_required(raw, "radius", path), f"{path}.radius")
    if not radius > 0:
        raise ScenarioError(f"{path}.radius", "must be positive")
    low = _vector(_required(raw, "low", path), dim, f"{path}.low")
    high = _vector(_required(raw, "high", path), dim, f"{path}.high")
    if any(h < lo for lo, h in zip(low, high)):
        raise ScenarioError(f"{path}.high", "must be at least low in every component")
    spacing = _number(raw.get("min_spacing", 2.0 * radius), f"{path}.min_spacing")
    mode = _goal_mode(raw.get("goal_mode", GoalMode.FULL_REST.value), f"{path}.goal_mode")
    try:
        starts, goals = random_spawn(count, low, high, spacing, seed)
    except ValueError as exc:
        raise ScenarioError(path, str(exc)) from None
    zeros = (0.0,) * dim
    return [RobotConfig(i, radius, tuple(map(float, starts[i])), zeros, zeros,
                        (GoalConfig(tuple(map(float, goals[i])), mode),))
            for i in range(count)]


_TOP_KEYS = ("dimension", "seed", "robots", "random_spawn", "weights", "limits", "sim", "solver")

_WEIGHT_FIELDS = {
    "q_dynm": _number, "q_obs": _number, "q_lim": _number, "k_t": _number, "k_p": _number,
    "collision_sign": _integer, "collision_mode": _collision_mode,
}
_LIMIT_FIELDS = {"vel": _number, "acc": _number, "jerk": _number}
_SIM_FIELDS = {
    "dt_sim": _number, "replan_hz": _number, "duration_max": _number,
    "goal_switch_tolerance": _number, "parallel_replan": _boolean, "sample_log_dt": _number,
    "comm_delay_ticks": _integer, "rest_approach_distance": _number,
}
_SOLVER_FIELDS = {
    "max_iter": _integer, "grad_tol": _number, "quad_nodes": _integer, "quad_panels": _integer,
    "t_min": _number,
    "j_nominal": _number, "q_end": _number, "tie_break_offset": _number,
}


def build_scenario(data, seed: int | None = None) -> ScenarioConfig:
    """Validate an already-loaded mapping; ``seed`` overrides the file's seed."""
    data = _mapping(data, "")
    _check_keys(data, _TOP_KEYS, "")
    dim = _integer(data.get("dimension", 3), "dimension")
    if dim < 1:
        raise ScenarioError("dimension", "must be at least 1")
    if seed is None and data.get("seed") is not None:
        seed = _integer(data["seed"], "seed")

    has_robots = "robots" in data
    has_spawn = "random_spawn" in data
    if has_robots == has_spawn:
        raise ScenarioError("robots", "give exactly one of robots or random_spawn")
    if has_robots:
        raw = data["robots"]
        if not isinstance(raw, list) or not raw:
            raise ScenarioError("robots", "expected a non-empty list")
        robots = [_parse_robot(r, dim, f"robots[{i}]") for i, r in enumerate(raw)]
        seen = set()
        for i, r in enumerate(robots):
            if r.id in seen:
                raise ScenarioError(f"robots[{i}].id", f"duplicate id {r.id}")
            seen.add(r.id)
    else:
        robots = _parse_spawn(data["random_spawn"], dim, seed)

    limits = _section(data, "limits", DynamicLimits, _LIMIT_FIELDS)
    solver = _section(data, "solver", SolverConfig, _SOLVER_FIELDS)
    if "j_nominal" not in _mapping(data.get("solver"), "solver"):
        solver = replace(solver, j_nominal=2.0 * limits.jerk)
    _check_solver(solver)
    weights = _section(data, "weights", PlannerWeights, _WEIGHT_FIELDS, {"q_end": solver.q_end})
    sim = _section(data, "sim", SimConfig, _SIM_FIELDS)
    return ScenarioConfig(dim, tuple(robots), weights, limits, sim, solver, seed)


def _check_solver(s: SolverConfig):
    checks = [
        ("max_iter", s.max_iter >= 0, "must be non-negative"),
        ("grad_tol", s.grad_tol >= 0, "must be non-negative"),
        ("quad_nodes", s.quad_nodes >= 1, "must be at least 1"),
        ("quad_panels", s.quad_panels >= 1, "must be at least 1"),
        ("t_min", s.t_min > 0, "must be positive"),
        ("j_nominal", s.j_nominal > 0, "must be positive"),
        ("q_end", s.q_end > 0, "must be positive"),
        ("tie_break_offset", s.tie_break_offset >= 0, "must be non-negative"),
    ]
    for name, ok, message in checks:
        if not ok:
            raise ScenarioError(f"solver.{name}", message)


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-5`` (no dot) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^[-+]?(?:[0-9][0-9_]*(?:\.[0-9_]*)?|\.[0-9_]+)[eE][-+]?[0-9]+$"""),
    list("-+0123456789."))


def parse_scenario(text: str, seed: int | None = None) -> ScenarioConfig:
    """Parse scenario YAML text into a validated :class:`ScenarioConfig`."""
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ScenarioError("", f"not valid YAML: {exc}") from None
    return build_scenario(data, seed)


def load_scenario(path, seed: int | None = None) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read(), seed)


def with_overrides(config: ScenarioConfig, *, quad_nodes: int | None = None,
                   replan_hz: float | None = None, parallel: bool | None = None) -> ScenarioConfig:
    """Copy of ``config`` with command-line overrides applied and re-validated."""
    data = config.to_dict()
    if quad_nodes is not None:
        data["solver"]["quad_nodes"] = quad_nodes
    if replan_hz is not None:
        data["sim"]["replan_hz"] = replan_hz
    if parallel is not None:
        data["sim"]["parallel_replan"] = parallel
    return build_scenario(data, config.seed)


def scenario_fields() -> dict[str, tuple[str, ...]]:
    """Accepted keys of every section, for documentation and tooling."""
    return {
        "top": _TOP_KEYS,
        "robots[]": _ROBOT_KEYS,
        "robots[].goals[]": _GOAL_KEYS,
        "random_spawn": _SPAWN_KEYS,
        "weights": tuple(_WEIGHT_FIELDS),
        "limits": tuple(_LIMIT_FIELDS),
        "sim": tuple(_SIM_FIELDS),
        "solver": tuple(_SOLVER_FIELDS),
    }



# -- single planning instances -----------------------------------------------

_PROBLEM_KEYS = ("state0", "goal", "own_radius", "obstacles", "peers", "weights", "limits",
                 "solver")
_STATE_KEYS = ("p", "v", "a")
_OBSTACLE_KEYS = ("coeffs", "duration", "radius")
_PEER_KEYS = ("p", "v", "a", "goal", "radius")


@dataclass(frozen=True)
class PlanProblemConfig:
    """One planning instance: the robot, its goal and the moving obstacles.

    Obstacles are given either as explicit quintics or as peers (state plus
    goal position) that are turned into predictions.
    """

    state0: RobotState
    goal: GoalSpec
    own_radius: float
    obstacles: tuple
    weights: PlannerWeights
    limits: DynamicLimits
    settings: SolverSettings
    predictor_settings: PredictorSettings


def _state(raw, dim: int, path: str, extra=()) -> RobotState:
    raw = _mapping(raw, path)
    _check_keys(raw, _STATE_KEYS + tuple(extra), path)
    p = _vector(_required(raw, "p", path), dim, f"{path}.p")
    zeros = [0.0] * dim
    v = _vector(raw.get("v", zeros), dim, f"{path}.v")
    a = _vector(raw.get("a", zeros), dim, f"{path}.a")
    return RobotState(p, v, a)


def build_plan_problem(data) -> PlanProblemConfig:
    """Validate a planning instance loaded from JSON."""
    data = _mapping(data, "")
    _check_keys(data, _PROBLEM_KEYS, "")
    p_raw = _mapping(_required(data, "state0", ""), "state0").get("p")
    if not isinstance(p_raw, (list, tuple)) or not p_raw:
        raise ScenarioError("state0.p", "expected a non-empty list of numbers")
    dim = len(p_raw)
    state0 = _state(data["state0"], dim, "state0")

    g = _mapping(_required(data, "goal", ""), "goal")
    _check_keys(g, _GOAL_KEYS, "goal")
    goal = GoalSpec(_vector(_required(g, "p_end", "goal"), dim, "goal.p_end"),
                    _goal_mode(g.get("mode", GoalMode.POSITION_ONLY.value), "goal.mode"))
    own_radius = _number(data.get("own_radius", 0.3), "own_radius")
    if not own_radius > 0:
        raise ScenarioError("own_radius", "must be positive")

    limits = _section(data, "limits", DynamicLimits, _LIMIT_FIELDS)
    solver = _section(data, "solver", SolverConfig, _SOLVER_FIELDS)
    if "j_nominal" not in _mapping(data.get("solver"), "solver"):
        solver = replace(solver, j_nominal=2.0 * limits.jerk)
    _check_solver(solver)
    weights = _section(data, "weights", PlannerWeights, _WEIGHT_FIELDS, {"q_end": solver.q_end})
    settings = SolverSettings(max_iter=solver.max_iter, grad_tol=solver.grad_tol,
                              quad_nodes=solver.quad_nodes, quad_panels=solver.quad_panels,
                              t_min=solver.t_min,
                              tie_break_offset=solver.tie_break_offset)
    pred = PredictorSettings(t_min=solver.t_min, j_nominal=solver.j_nominal)

    obstacles = []
    for i, raw in enumerate(data.get("obstacles") or []):
        path = f"obstacles[{i}]"
        raw = _mapping(raw, path)
        _check_keys(raw, _OBSTACLE_KEYS, path)
        coeffs = _required(raw, "coeffs", path)
        if not isinstance(coeffs, list) or len(coeffs) != dim:
            raise ScenarioError(f"{path}.coeffs", f"expected {dim} rows of 6 coefficients")
        rows = [_vector(row, 6, f"{path}.coeffs[{d}]") for d, row in enumerate(coeffs)]
        duration = _number(_required(raw, "duration", path), f"{path}.duration")
        if not duration > 0:
            raise ScenarioError(f"{path}.duration", "must be positive")
        radius = _number(raw.get("radius", own_radius), f"{path}.radius")
        if not radius > 0:
            raise ScenarioError(f"{path}.radius", "must be positive")
        obstacles.append(Obstacle(QuinticTrajectory(np.array(rows), duration), radius))
    for i, raw in enumerate(data.get("peers") or []):
        path = f"peers[{i}]"
        state = _state(raw, dim, path, extra=("goal", "radius"))
        goal_p = _vector(_required(raw, "goal", path), dim, f"{path}.goal")
        radius = _number(raw.get("radius", own_radius), f"{path}.radius")
        if not radius > 0:
            raise ScenarioError(f"{path}.radius", "must be positive")
        traj = predictor.predict(state, goal_p, pred).trajectory
        obstacles.append(Obstacle(traj, radius, i))
    return PlanProblemConfig(state0, goal, own_radius, tuple(obstacles), weights, limits,
                             settings, pred)
