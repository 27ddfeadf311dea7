"""Decentralized receding-horizon simulation of a robot fleet.

Every replanning period each robot receives the same broadcast snapshot of
all robots' states and goal positions, predicts a trajectory for each peer
with the closed-form predictor, plans its own trajectory around those
predictions, and then executes the first period of the plan.  Execution is
ideal tracking: a robot's state is its planned trajectory evaluated at the
elapsed time.
"""

from __future__ import annotations

import itertools
import logging
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import planner, predictor
from .planner import (
    DynamicLimits,
    GoalMode,
    GoalSpec,
    Obstacle,
    PlannerWeights,
    PlanResult,
    SolverSettings,
)
from .predictor import PredictorSettings
from .trajectory import QuinticTrajectory, RobotState, evaluate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    dt_sim: float = 0.005
    replan_hz: float = 8.0
    duration_max: float = 60.0
    goal_switch_tolerance: float = 0.1
    parallel_replan: bool = False
    sample_log_dt: float = 0.01
    comm_delay_ticks: int = 0
    # Beyond this distance a full_rest goal is planned as position_only: a
    # single quintic pinned at both ends has no freedom left to swerve.
    rest_approach_distance: float = 1.0

    def __post_init__(self):
        if not self.dt_sim > 0:
            raise ValueError("dt_sim must be positive")
        if not self.replan_hz > 0:
            raise ValueError("replan_hz must be positive")
        if 1.0 / self.replan_hz < self.dt_sim:
            raise ValueError("replanning period shorter than dt_sim")
        if not self.duration_max > 0:
            raise ValueError("duration_max must be positive")
        if self.comm_delay_ticks < 0:
            raise ValueError("comm_delay_ticks must be non-negative")
        if self.rest_approach_distance < 0:
            raise ValueError("rest_approach_distance must be non-negative")
        ratio = self.sample_log_dt / self.dt_sim
        if not self.sample_log_dt > 0 or abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("sample_log_dt must be a positive multiple of dt_sim")

    @property
    def steps_per_tick(self) -> int:
        return max(1, int(round(1.0 / (self.replan_hz * self.dt_sim))))

    @property
    def steps_per_sample(self) -> int:
        return int(round(self.sample_log_dt / self.dt_sim))


@dataclass
class RobotAgent:
    id: int
    radius: float
    state: RobotState
    goal_queue: list[GoalSpec]
    weights: PlannerWeights = field(default_factory=PlannerWeights)
    limits: DynamicLimits = field(default_factory=DynamicLimits)
    solver: SolverSettings = field(default_factory=SolverSettings)
    predictor_settings: PredictorSettings = field(default_factory=PredictorSettings)
    goal_index: int = 0
    active_trajectory: QuinticTrajectory | None = None
    trajectory_age: float = 0.0
    solver_memory: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"robot {self.id}: radius must be positive")
        if not self.goal_queue:
            raise ValueError(f"robot {self.id}: at least one goal is required")

    @property
    def goal(self) -> GoalSpec:
        return self.goal_queue[self.goal_index]

    def at_goal(self, tolerance: float) -> bool:
        g = self.goal
        if np.linalg.norm(self.state.p - g.p_end) > tolerance:
            return False
        return g.mode is not GoalMode.FULL_REST or np.linalg.norm(self.state.v) <= tolerance

    def finished(self, tolerance: float) -> bool:
        return self.goal_index == len(self.goal_queue) - 1 and self.at_goal(tolerance)

    def jerk(self) -> np.ndarray:
        traj = self.active_trajectory
        if traj is None or self.trajectory_age > traj.duration:
            return np.zeros(self.state.dim)
        return evaluate(traj, self.trajectory_age, 3)


@dataclass(frozen=True)
class PeerInfo:
    id: int
    radius: float
    state: RobotState
    goal_position: np.ndarray


@dataclass(frozen=True)
class WorldSnapshot:
    sim_time: float
    robots: tuple[PeerInfo, ...]

    def ids(self) -> list[int]:
        return [r.id for r in self.robots]


@dataclass(frozen=True)
class ReplanEvent:
    robot_id: int
    sim_time: float
    iterations: int
    objective: float
    wall_time: float
    converged: bool
    termination: str
    degraded: bool = False
    error: str | None = None


@dataclass
class SimLog:
    """Everything recorded during a run.

    ``samples`` has shape ``(S, M, 4, N)``: for each log time, each robot (in
    ``robot_ids`` order) and derivative order 0..3.  ``separation`` holds the
    distance of every pair in ``pairs`` at each log time.
    """

    robot_ids: list[int]
    radii: list[float]
    limits: list[DynamicLimits]
    dim: int
    sample_log_dt: float
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    samples: np.ndarray | None = None
    replans: list[ReplanEvent] = field(default_factory=list)
    pairs: list[tuple[int, int]] = field(default_factory=list)
    separation: np.ndarray | None = None
    limit_ratio: np.ndarray | None = None
    timed_out: bool = False
    makespan: float = 0.0
    seed: int | None = None

    @property
    def pair_thresholds(self) -> np.ndarray:
        idx = {rid: i for i, rid in enumerate(self.robot_ids)}
        return np.array([self.radii[idx[a]] + self.radii[idx[b]] for a, b in self.pairs])


def snapshot_of(agents, sim_time: float) -> WorldSnapshot:
    return WorldSnapshot(sim_time, tuple(
        PeerInfo(a.id, a.radius, a.state, a.goal.p_end.copy()) for a in agents))


def predict_peers(agent: RobotAgent, snapshot: WorldSnapshot) -> list[Obstacle]:
    obstacles = []
    for peer in snapshot.robots:
        if peer.id == agent.id:
            continue
        pred = predictor.predict(peer.state, peer.goal_position, agent.predictor_settings)
        obstacles.append(Obstacle(pred.trajectory, peer.radius, peer.id))
    return obstacles


def planning_goal(agent: RobotAgent, rest_approach_distance: float | None = None) -> GoalSpec:
    goal = agent.goal
    if (rest_approach_distance is not None and goal.mode is GoalMode.FULL_REST
            and np.linalg.norm(agent.state.p - goal.p_end) > rest_approach_distance):
        return GoalSpec(goal.p_end, GoalMode.POSITION_ONLY)
    return goal


def replan_robot(agent: RobotAgent, snapshot: WorldSnapshot,
                 rest_approach_distance: float | None = None) -> PlanResult:
    """Predict every peer in ``snapshot`` and plan ``agent`` around them.

    With ``rest_approach_distance`` set, a distant full_rest goal is planned
    with a free terminal velocity and acceleration until the robot is close.
    """
    if agent.id not in snapshot.ids():
        raise ValueError(f"snapshot does not contain robot {agent.id}")
    obstacles = predict_peers(agent, snapshot)
    return planner.plan(
        agent.state, planning_goal(agent, rest_approach_distance), obstacles,
        weights=agent.weights, limits=agent.limits,
        warm_start=agent.active_trajectory, warm_start_age=agent.trajectory_age,
        own_radius=agent.radius, settings=agent.solver,
        predictor_settings=agent.predictor_settings,
        inverse_hessian=agent.solver_memory,
    )


def step(agents, dt_sim: float):
    """Advance every agent along its active trajectory by ``dt_sim`` (ideal tracking)."""
    for agent in agents:
        traj = agent.active_trajectory
        if traj is None:
            raise ValueError(f"robot {agent.id} has no active trajectory")
        agent.trajectory_age += dt_sim
        agent.state = traj.state_at(min(agent.trajectory_age, traj.duration))
    return agents


class Swarm:
    """Coordinator owning the agents, the clock and the log buffers."""

    def __init__(self, agents, config: SimConfig | None = None, seed: int | None = None):
        self.agents = sorted(agents, key=lambda a: a.id)
        ids = [a.id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ValueError("robot ids must be unique")
        dims = {a.state.dim for a in self.agents}
        if len(dims) != 1:
            raise ValueError("all robots must share one dimension")
        self.config = config or SimConfig()
        self.step_count = 0
        self.finished = False
        self._history: deque[WorldSnapshot] = deque(maxlen=self.config.comm_delay_ticks + 1)
        self.log = SimLog(
            robot_ids=ids, radii=[a.radius for a in self.agents],
            limits=[a.limits for a in self.agents], dim=dims.pop(),
            sample_log_dt=self.config.sample_log_dt, seed=seed,
            pairs=list(itertools.combinations(ids, 2)),
        )
        self._times: list[float] = []
        self._samples: list[np.ndarray] = []
        self._executor = None

    @property
    def sim_time(self) -> float:
        return self.step_count * self.config.dt_sim

    def _advance_goals(self):
        tol = self.config.goal_switch_tolerance
        for agent in self.agents:
            while agent.goal_index < len(agent.goal_queue) - 1 and agent.at_goal(tol):
                agent.goal_index += 1

    def all_finished(self) -> bool:
        tol = self.config.goal_switch_tolerance
        return all(a.finished(tol) for a in self.agents)

    def _record(self):
        k = self.step_count // self.config.steps_per_sample
        self._times.append(k * self.config.sample_log_dt)
        self._samples.append(np.stack([
            np.stack([a.state.p, a.state.v, a.state.a, a.jerk()]) for a in self.agents]))

    def _broadcast(self) -> WorldSnapshot:
        snap = snapshot_of(self.agents, self.sim_time)
        self._history.append(snap)
        return snap

    def _peer_view(self, agent: RobotAgent, current: WorldSnapshot) -> WorldSnapshot:
        stale = self._history[0]
        if stale is current:
            return current
        robots = tuple(p if p.id != agent.id else next(q for q in current.robots if q.id == agent.id)
                       for p in stale.robots)
        return WorldSnapshot(stale.sim_time, robots)

    def _replan_one(self, agent: RobotAgent, snapshot: WorldSnapshot):
        start = time.perf_counter()
        try:
            result = replan_robot(agent, self._peer_view(agent, snapshot),
                                  self.config.rest_approach_distance)
            error = None
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            result, error = None, f"{type(exc).__name__}: {exc}"
        return result, error, time.perf_counter() - start

    def replan_all(self):
        snapshot = self._broadcast()
        if self.config.parallel_replan and len(self.agents) > 1:
            if self._executor is None:
                self._executor = ThreadPoolExecutor(max_workers=len(self.agents))
            outcomes = list(self._executor.map(lambda a: self._replan_one(a, snapshot), self.agents))
        else:
            outcomes = [self._replan_one(a, snapshot) for a in self.agents]

        for agent, (result, error, wall) in zip(self.agents, outcomes):
            if result is None:
                log.warning("robot %d: replanning failed at t=%.3f (%s); keeping previous plan",
                            agent.id, self.sim_time, error)
                if agent.active_trajectory is None:
                    agent.active_trajectory = QuinticTrajectory(
                        np.column_stack([agent.state.p] + [np.zeros(agent.state.dim)] * 5),
                        agent.solver.t_min)
                    agent.trajectory_age = 0.0
                self.log.replans.append(ReplanEvent(agent.id, self.sim_time, 0, float("nan"), wall,
                                                    False, "error", degraded=True, error=error))
                continue
            agent.active_trajectory = result.trajectory
            agent.trajectory_age = 0.0
            agent.solver_memory = result.inverse_hessian
            self.log.replans.append(ReplanEvent(agent.id, self.sim_time, result.iterations,
                                                result.objective, wall, result.converged,
                                                result.termination))

    def tick(self):
        """One replanning period: advance goals, replan everyone, execute."""
        cfg = self.config
        self._advance_goals()
        self.replan_all()
        if self.step_count == 0 and not self._samples:
            self._record()
        for _ in range(cfg.steps_per_tick):
            step(self.agents, cfg.dt_sim)
            self.step_count += 1
            if self.step_count % cfg.steps_per_sample == 0:
                self._record()
                if self.all_finished():
                    self.finished = True
                    return

    def run(self) -> SimLog:
        cfg = self.config
        try:
            while True:
                if self.all_finished():
                    self.finished = True
                    if not self._samples:
                        self._record()
                    break
                if self.sim_time >= cfg.duration_max - 1e-12:
                    self.log.timed_out = True
                    break
                self.tick()
                if self.finished:
                    break
        finally:
            if self._executor is not None:
                self._executor.shutdown()
                self._executor = None
        return self.finalize()

    def finalize(self) -> SimLog:
        lg = self.log
        lg.times = np.array(self._times)
        lg.samples = np.array(self._samples).reshape(len(self._times), len(self.agents), 4, lg.dim)
        lg.makespan = float(lg.times[-1]) if len(lg.times) else 0.0
        idx = {rid: i for i, rid in enumerate(lg.robot_ids)}
        pos = lg.samples[:, :, 0, :]
        lg.separation = np.stack(
            [np.linalg.norm(pos[:, idx[a]] - pos[:, idx[b]], axis=-1) for a, b in lg.pairs],
            axis=1) if lg.pairs else np.zeros((len(lg.times), 0))
        tau = np.stack([lim.tau for lim in lg.limits])
        lg.limit_ratio = np.linalg.norm(lg.samples[:, :, 1:, :], axis=-1) / tau[None]
        return lg


def run(agents, config: SimConfig | None = None, seed: int | None = None) -> SimLog:
    return Swarm(agents, config, seed).run()


def metrics(log: SimLog) -> dict:
    """Summary statistics of a finished run."""
    sep = log.separation
    if sep is None or sep.size == 0:
        min_sep = float("inf")
        min_clear = float("inf")
        per_pair = {}
    else:
        pair_min = sep.min(axis=0)
        min_sep = float(pair_min.min())
        clear = pair_min - log.pair_thresholds
        min_clear = float(clear.min())
        per_pair = {f"{a}-{b}": float(m) for (a, b), m in zip(log.pairs, pair_min)}
    mags = np.linalg.norm(log.samples[:, :, 1:, :], axis=-1) if log.samples is not None \
        else np.zeros((0, len(log.robot_ids), 3))
    per_robot = {}
    for i, rid in enumerate(log.robot_ids):
        peak = mags[:, i].max(axis=0) if len(mags) else np.zeros(3)
        per_robot[str(rid)] = {"max_vel": float(peak[0]), "max_acc": float(peak[1]),
                               "max_jerk": float(peak[2])}
    walls = np.array([e.wall_time for e in log.replans])
    return {
        "min_separation": min_sep,
        "min_clearance": min_clear,
        "pair_min_separation": per_pair,
        "per_robot": per_robot,
        "makespan": log.makespan,
        "replan_count": len(log.replans),
        "replan_wall_mean": float(walls.mean()) if walls.size else 0.0,
        "replan_wall_max": float(walls.max()) if walls.size else 0.0,
        "degraded_replans": sum(e.degraded for e in log.replans),
        "limit_exceedances": int(np.sum(log.limit_ratio > 1.05)) if log.limit_ratio is not None else 0,
        "timed_out": log.timed_out,
        "seed": log.seed,
    }
