"""Collision-aware quintic planning with free end time.

The decision vector holds the three free coefficients (``t^3, t^4, t^5``) of
every dimension followed by ``theta``, with ``T = t_min + exp(theta)``.  The
constant, linear and quadratic coefficients are pinned by the start state, so
the start constraint holds exactly and the problem is unconstrained:

    objective = Q_dynm * int ||jerk||^2          (closed form)
              + Q_obs  * sum_obs int c(t)       (Gauss-Legendre)
              + Q_lim  * sum_k int exp(||x^(k)||^2 - tau_k^2)   (Gauss-Legendre)
              + K_t * T
              + Q_end * ||terminal error||^2

All cost terms are evaluated for a whole batch of decision vectors at once;
the finite-difference gradient and the line search each cost a single
batched call.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from math import comb

import numpy as np

from . import predictor
from .predictor import PredictorSettings
from .trajectory import (
    N_COEFFS,
    QuinticTrajectory,
    RobotState,
    derivative_coeffs,
    derivatives_batch,
    polyval_batch,
    refit_from,
    squared_derivative_integral,
    squared_derivative_integrals,
)

EXP_CAP = 500.0
MIN_DISTANCE = 1e-9
# ||dv|| is replaced by sqrt(||dv||^2 + eta^2) - eta: the plain norm has a kink
# at zero relative velocity that finite differences turn into spurious slopes
SPEED_SMOOTHING = 1e-3


# _BINOM[j, i] = C(j, i); _POW_GAP[j, i] = max(j - i, 0)
_BINOM = np.array([[comb(j, i) for i in range(N_COEFFS)] for j in range(N_COEFFS)], dtype=float)
_POW_GAP = np.maximum(np.subtract.outer(np.arange(N_COEFFS), np.arange(N_COEFFS)), 0)


def _on_interval(coeffs: np.ndarray, start, length, order: int,
                 unit_basis: np.ndarray) -> np.ndarray:
    """``order``-th derivative at ``start + length * u`` for fixed unit nodes ``u``.

    ``coeffs`` is ``(..., N, 6)``; ``start`` and ``length`` broadcast against
    its leading axes and ``unit_basis[i, q] = u_q**i``.  The polynomial is
    re-expanded in ``u`` (a 6x6 map per interval), so the node evaluation is a
    single matrix product.  Returns ``(..., N, Q)``.
    """
    dc = derivative_coeffs(coeffs, order)
    m = dc.shape[-1]
    start = np.asarray(start, dtype=float)[..., None, None]
    length = np.asarray(length, dtype=float)[..., None, None]
    remap = _BINOM[:m, :m] * start ** _POW_GAP[:m, :m] * length ** np.arange(m)
    q = dc @ remap
    lead = q.shape[:-1]
    return (q.reshape(-1, m) @ unit_basis[:m]).reshape(lead + (unit_basis.shape[1],))


def composite_gauss_legendre(nodes: int, panels: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on ``[0, 1]``: ``panels`` equal panels of ``nodes`` points each."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    start = np.arange(panels)[:, None] / panels
    u = (start + 0.5 * (x + 1.0) / panels).reshape(-1)
    return u, np.tile(0.5 * w / panels, panels)


def _capped_exp(x: np.ndarray) -> np.ndarray:
    """``exp(x)``, continued linearly (C1) beyond ``EXP_CAP`` so it never overflows."""
    return np.where(x > EXP_CAP, np.exp(EXP_CAP) * (1.0 + (x - EXP_CAP)), np.exp(np.minimum(x, EXP_CAP)))


class GoalMode(str, enum.Enum):
    POSITION_ONLY = "position_only"
    FULL_REST = "full_rest"


class CollisionMode(str, enum.Enum):
    # sign * range_rate * exp(-K_p (d - rho)); an exact time derivative.
    RANGE_RATE = "range_rate"
    # ||v - v_obs|| * exp(-K_p (d - rho)), norm smoothed at zero; path dependent.
    RELATIVE_SPEED = "relative_speed"


@dataclass(frozen=True)
class PlannerWeights:
    q_dynm: float = 1.0
    q_obs: float = 50.0
    q_lim: float = 10.0
    k_t: float = 10.0
    k_p: float = 3.0
    q_end: float = 1e4
    collision_sign: int = -1
    collision_mode: CollisionMode = CollisionMode.RELATIVE_SPEED

    def __post_init__(self):
        for name in ("q_dynm", "q_obs", "q_lim", "k_t", "k_p"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.q_end > 0:
            raise ValueError("q_end must be positive")
        if self.collision_sign not in (-1, 1):
            raise ValueError("collision_sign must be -1 or +1")
        object.__setattr__(self, "collision_mode", CollisionMode(self.collision_mode))


@dataclass(frozen=True)
class DynamicLimits:
    vel: float = 2.0
    acc: float = 4.0
    jerk: float = 8.0

    def __post_init__(self):
        if not (self.vel > 0 and self.acc > 0 and self.jerk > 0):
            raise ValueError("dynamic limits must be positive")

    @property
    def tau(self) -> np.ndarray:
        return np.array([self.vel, self.acc, self.jerk])


@dataclass(frozen=True)
class GoalSpec:
    p_end: np.ndarray
    mode: GoalMode = GoalMode.POSITION_ONLY
    v_end: np.ndarray | None = None
    a_end: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.p_end, dtype=float).reshape(-1)
        object.__setattr__(self, "p_end", p)
        object.__setattr__(self, "mode", GoalMode(self.mode))
        for name in ("v_end", "a_end"):
            val = getattr(self, name)
            val = np.zeros_like(p) if val is None else np.asarray(val, dtype=float).reshape(-1)
            if val.shape != p.shape:
                raise ValueError(f"{name} dimension does not match p_end")
            object.__setattr__(self, name, val)

    @property
    def dim(self) -> int:
        return self.p_end.shape[0]


@dataclass(frozen=True)
class Obstacle:
    trajectory: QuinticTrajectory
    radius: float
    robot_id: int | None = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("obstacle radius must be positive")


@dataclass(frozen=True)
class SolverSettings:
    max_iter: int = 400
    grad_tol: float = 1e-6
    stall_tol: float = 1e-9
    stall_iters: int = 20
    quad_nodes: int = 24
    # Gauss-Legendre panels per integration interval, quad_nodes nodes each
    quad_panels: int = 3
    t_min: float = predictor.T_MIN
    # Offset (m) added to a cold-start guess when peers are present, to break
    # ties in symmetric encounters: to the right of travel, and in 3-D tilted
    # 45 degrees upward so coplanar swarms can also separate vertically.
    tie_break_offset: float = 1e-3

    def __post_init__(self):
        if (self.max_iter < 0 or self.quad_nodes < 1 or self.quad_panels < 1
                or not self.t_min > 0):
            raise ValueError("invalid solver settings")


@dataclass(frozen=True)
class CostBreakdown:
    smoothness: float
    collision: float
    limits: float
    time: float
    end_penalty: float

    @property
    def total(self) -> float:
        return self.smoothness + self.collision + self.limits + self.time + self.end_penalty


@dataclass(frozen=True)
class PlanResult:
    trajectory: QuinticTrajectory
    objective: float
    iterations: int
    converged: bool
    termination: str
    breakdown: CostBreakdown
    decision: np.ndarray = field(repr=False)
    near_contact: bool = False
    inverse_hessian: np.ndarray | None = field(default=None, repr=False)


class PlanningProblem:
    """Everything the objective depends on, with obstacle data pre-stacked."""

    def __init__(self, state0: RobotState, goal: GoalSpec, obstacles=(),
                 own_radius: float = 0.3, weights: PlannerWeights | None = None,
                 limits: DynamicLimits | None = None, settings: SolverSettings | None = None):
        if goal.dim != state0.dim:
            raise ValueError("goal and state dimensions differ")
        self.state0 = state0
        self.goal = goal
        self.obstacles = tuple(obstacles)
        self.own_radius = float(own_radius)
        self.weights = weights or PlannerWeights()
        self.limits = limits or DynamicLimits()
        self.settings = settings or SolverSettings()
        self.dim = state0.dim
        self.n_vars = 3 * self.dim + 1

        self._fixed = np.column_stack([state0.p, state0.v, state0.a / 2.0])
        self._unit_nodes, self._unit_weights = composite_gauss_legendre(
            self.settings.quad_nodes, self.settings.quad_panels)
        self._unit_basis = self._unit_nodes[None, :] ** np.arange(N_COEFFS)[:, None]
        self._tau_sq = self.limits.tau ** 2

        if self.obstacles:
            for ob in self.obstacles:
                if ob.trajectory.dim != self.dim:
                    raise ValueError("obstacle dimension does not match state")
            self._obs_coeffs = np.stack([ob.trajectory.coeffs for ob in self.obstacles])
            self._obs_T = np.array([ob.trajectory.duration for ob in self.obstacles])
            self._obs_end = np.stack([polyval_batch(ob.trajectory.coeffs, ob.trajectory.duration)
                                      for ob in self.obstacles])
            self._rho = self.own_radius + np.array([ob.radius for ob in self.obstacles])

    # -- decision encoding -------------------------------------------------

    def encode(self, traj: QuinticTrajectory) -> np.ndarray:
        T = traj.duration
        if not T > self.settings.t_min:
            raise ValueError(f"duration {T} must exceed t_min={self.settings.t_min}")
        return np.concatenate([traj.coeffs[:, 3:].reshape(-1), [np.log(T - self.settings.t_min)]])

    def decode_batch(self, X: np.ndarray):
        X = np.atleast_2d(X)
        B = X.shape[0]
        free = X[:, :-1].reshape(B, self.dim, 3)
        fixed = np.broadcast_to(self._fixed, (B, self.dim, 3))
        coeffs = np.concatenate([fixed, free], axis=2)
        t_min = self.settings.t_min
        with np.errstate(over="ignore"):
            # exp(theta) below half an ulp of t_min would round T down onto it
            T = np.maximum(t_min + np.exp(X[:, -1]), np.nextafter(t_min, np.inf))
        return coeffs, T

    def decode(self, x: np.ndarray) -> QuinticTrajectory:
        coeffs, T = self.decode_batch(np.asarray(x, dtype=float)[None])
        return QuinticTrajectory(coeffs[0], float(T[0]))

    # -- cost terms ----------------------------------------------------------

    def cost_terms(self, X: np.ndarray) -> tuple[np.ndarray, bool]:
        """Cost breakdown for a batch of decisions, shape ``(B, 5)``.

        Columns: smoothness, collision, limits, time, end penalty.  Rows with a
        non-finite decision or cost are set to ``+inf``.  The flag reports a
        quadrature node where the distance to an obstacle fell below 1e-9.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        coeffs, T = self.decode_batch(X)
        out, near_contact = self.trajectory_terms(coeffs, T)
        out[~np.all(np.isfinite(X), axis=1)] = np.inf
        return out, near_contact

    def trajectory_terms(self, coeffs: np.ndarray, T: np.ndarray) -> tuple[np.ndarray, bool]:
        """Same as :meth:`cost_terms` for explicit ``(B, N, 6)`` coefficients."""
        W = self.weights
        out = np.zeros((coeffs.shape[0], 5))
        near_contact = False
        with np.errstate(all="ignore"):
            out[:, 0] = W.q_dynm * squared_derivative_integrals(coeffs, 3, 0.0, T)
            out[:, 3] = W.k_t * T

            t = T[:, None] * self._unit_nodes
            dt = T[:, None] * self._unit_weights
            derivs = derivatives_batch(coeffs, t, range(4))

            if W.q_lim > 0:
                total = 0.0
                for k in range(1, 4):
                    expo = np.sum(derivs[k] ** 2, axis=-1) - self._tau_sq[k - 1]
                    total = total + np.sum(_capped_exp(expo) * dt, axis=-1)
                out[:, 2] = W.q_lim * total

            if self.obstacles and W.q_obs > 0:
                coll, near_contact = self._collision(coeffs, T)
                out[:, 1] = W.q_obs * coll

            if self.goal.mode is GoalMode.FULL_REST:
                p_T, v_T, a_T = derivatives_batch(coeffs, T[:, None], (0, 1, 2))
                pen = (np.sum((p_T[:, 0] - self.goal.p_end) ** 2, axis=-1)
                       + np.sum((v_T[:, 0] - self.goal.v_end) ** 2, axis=-1)
                       + np.sum((a_T[:, 0] - self.goal.a_end) ** 2, axis=-1))
            else:
                p_T = polyval_batch(coeffs, T[:, None], 0)
                pen = np.sum((p_T[:, 0] - self.goal.p_end) ** 2, axis=-1)
            out[:, 4] = W.q_end * pen
        out[~np.all(np.isfinite(out), axis=1)] = np.inf
        return out, near_contact

    def _collision(self, coeffs, T):
        # Each obstacle's integral is split at its horizon: the prediction may
        # end with non-zero velocity and is then held at rest, so the
        # integrand jumps there and a single rule over [0, T] would not be
        # continuous in T.
        T = T[:, None]                                    # (B, 1)
        split = np.minimum(T, self._obs_T)                # (B, O)
        starts = np.stack([np.zeros_like(split), split], axis=-1)
        lengths = np.stack([split, T - split], axis=-1)   # (B, O, 2)
        # relative motion as one polynomial per interval: minus the
        # obstacle's quintic before its horizon, minus its endpoint after
        own = coeffs[:, None]                             # (B, 1, N, 6)
        before = own - self._obs_coeffs
        after = np.broadcast_to(own, before.shape).copy()
        after[..., 0] -= self._obs_end
        rel = np.stack([before, after], axis=2)           # (B, O, 2, N, 6)
        rel_p = _on_interval(rel, starts, lengths, 0, self._unit_basis)
        rel_v = _on_interval(rel, starts, lengths, 1, self._unit_basis)
        d = np.sqrt(np.einsum("bokny,bokny->boky", rel_p, rel_p))
        near = bool(np.any(d < MIN_DISTANCE))
        d = np.maximum(d, MIN_DISTANCE)
        barrier = np.exp(-self.weights.k_p * (d - self._rho[:, None, None]))
        if self.weights.collision_mode is CollisionMode.RANGE_RATE:
            rate = self.weights.collision_sign * np.einsum("bokny,bokny->boky", rel_p, rel_v) / d
        else:
            eta = SPEED_SMOOTHING
            rate = np.sqrt(np.einsum("bokny,bokny->boky", rel_v, rel_v) + eta * eta) - eta
        total = np.sum((rate * barrier) @ self._unit_weights * lengths, axis=-1)
        return np.sum(total, axis=1), near

    def objective_batch(self, X: np.ndarray) -> np.ndarray:
        return np.sum(self.cost_terms(X)[0], axis=1)

    def objective(self, x: np.ndarray) -> float:
        return float(self.objective_batch(np.asarray(x, dtype=float)[None])[0])

    def breakdown(self, x: np.ndarray) -> CostBreakdown:
        terms = self.cost_terms(np.asarray(x, dtype=float)[None])[0][0]
        return CostBreakdown(*(float(v) for v in terms))


# -- single-trajectory cost operations ----------------------------------------

def smoothness_cost(traj: QuinticTrajectory, q_dynm: float) -> float:
    return q_dynm * squared_derivative_integral(traj, 3, 0.0, traj.duration)


def _terms_for(traj: QuinticTrajectory, **kwargs) -> np.ndarray:
    settings = SolverSettings(quad_nodes=kwargs.pop("quad_nodes", SolverSettings.quad_nodes),
                              quad_panels=kwargs.pop("quad_panels", SolverSettings.quad_panels))
    goal = GoalSpec(np.zeros(traj.dim))
    problem = PlanningProblem(traj.state_at(0.0), goal, settings=settings, **kwargs)
    return problem.trajectory_terms(traj.coeffs[None], np.array([traj.duration]))[0][0]


def collision_cost(traj: QuinticTrajectory, obstacles, own_radius: float,
                   weights: PlannerWeights | None = None, quad_nodes: int = 24,
                   quad_panels: int = 3) -> float:
    """Weighted barrier integral against every obstacle over ``[0, T]``."""
    if not obstacles:
        return 0.0
    weights = weights or PlannerWeights()
    return float(_terms_for(traj, obstacles=obstacles, own_radius=own_radius,
                            weights=weights, quad_nodes=quad_nodes,
                            quad_panels=quad_panels)[1])


def limit_cost(traj: QuinticTrajectory, limits: DynamicLimits, q_lim: float,
               quad_nodes: int = 24, quad_panels: int = 3) -> float:
    return float(_terms_for(traj, limits=limits, weights=PlannerWeights(q_lim=q_lim),
                            quad_nodes=quad_nodes, quad_panels=quad_panels)[2])


def end_penalty(traj: QuinticTrajectory, goal: GoalSpec, q_end: float) -> float:
    T = traj.duration
    err = np.sum((polyval_batch(traj.coeffs, np.array([T]), 0)[0] - goal.p_end) ** 2)
    if goal.mode is GoalMode.FULL_REST:
        err += np.sum((polyval_batch(traj.coeffs, np.array([T]), 1)[0] - goal.v_end) ** 2)
        err += np.sum((polyval_batch(traj.coeffs, np.array([T]), 2)[0] - goal.a_end) ** 2)
    return float(q_end * err)


def total_objective(decision: np.ndarray, problem: PlanningProblem) -> float:
    return problem.objective(decision)


# -- gradient and solver ---------------------------------------------------

def _central_difference(fbatch, x: np.ndarray, f0: float | None = None) -> np.ndarray:
    n = x.size
    h = 1e-6 * np.maximum(1.0, np.abs(x))
    stencil = np.repeat(x[None], 2 * n, axis=0)
    idx = np.arange(n)
    stencil[idx, idx] += h
    stencil[n + idx, idx] -= h
    # steps actually taken after rounding
    hp = stencil[idx, idx] - x
    hm = x - stencil[n + idx, idx]
    f = fbatch(stencil)
    fp, fm = f[:n], f[n:]
    g = (fp - fm) / (hp + hm)
    bad = ~np.isfinite(g)
    if np.any(bad):
        if f0 is None:
            f0 = float(fbatch(x[None])[0])
        if not np.isfinite(f0):
            raise FloatingPointError("objective is not finite at the decision point")
        fwd = (fp - f0) / hp
        bwd = (f0 - fm) / hm
        g = np.where(bad & np.isfinite(fp), fwd, g)
        g = np.where(bad & ~np.isfinite(fp) & np.isfinite(fm), bwd, g)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("gradient could not be formed from finite differences")
    return g


def gradient(decision: np.ndarray, problem: PlanningProblem,
             f0: float | None = None) -> np.ndarray:
    """Central differences with step ``1e-6 * max(1, |x_i|)``.

    Falls back to a one-sided difference for any coordinate whose stencil hits
    a non-finite objective.
    """
    return _central_difference(problem.objective_batch, np.asarray(decision, dtype=float), f0)


_STEP_LADDER = 0.5 ** np.arange(12)
_ARMIJO = 1e-4
# longest trial step in solver coordinates (metres / log-seconds)
_MAX_STEP = 1.0
# duration multipliers tried on a cold-start guess
_COLD_STRETCH = np.array([1.0, 1.25, 1.5, 2.0, 2.5, 3.0])


class _NormalizedTime:
    """Solver coordinates: coefficients of the polynomial in ``s = t / T``.

    ``z_j = alpha_j * T**j`` keeps every free coordinate on the scale of a
    position, and changing ``theta`` at fixed ``z`` stretches the path in time
    without changing its shape.
    """

    def __init__(self, problem: PlanningProblem):
        self.problem = problem
        self.powers = np.tile(np.arange(3, 6), problem.dim)
        self.t_min = problem.settings.t_min

    def to_decision(self, Z: np.ndarray) -> np.ndarray:
        Z = np.atleast_2d(Z)
        with np.errstate(over="ignore", invalid="ignore"):
            T = self.t_min + np.exp(Z[:, -1:])
            return np.concatenate([Z[:, :-1] / T ** self.powers, Z[:, -1:]], axis=1)

    def from_decision(self, x: np.ndarray) -> np.ndarray:
        T = self.t_min + np.exp(x[-1])
        return np.concatenate([x[:-1] * T ** self.powers, x[-1:]])

    def __call__(self, Z: np.ndarray) -> np.ndarray:
        return self.problem.objective_batch(self.to_decision(Z))


def _line_search(fbatch, z, f, g, p):
    size = np.max(np.abs(p))
    if size > _MAX_STEP:
        p = p * (_MAX_STEP / size)
    slope = float(g @ p)
    for scale in (1.0, 0.5**12, 0.5**24):
        steps = scale * _STEP_LADDER
        fs = fbatch(z[None] + steps[:, None] * p[None])
        ok = np.nonzero(fs <= f + _ARMIJO * steps * slope)[0]
        if ok.size:
            i = ok[0]
            return steps[i] * p, fs[i]
    return None, None


def solve(initial: np.ndarray, problem: PlanningProblem,
          inverse_hessian: np.ndarray | None = None) -> PlanResult:
    """BFGS with a backtracking Armijo line search.

    Iterates in normalized-time coordinates.  Stops when
    ``max|g| <= grad_tol * (1 + |f|)`` ("gradient"), when the objective
    improves by less than ``stall_tol`` for ``stall_iters`` consecutive
    iterations ("stalled"), when the line search cannot make progress even
    along steepest descent ("line_search"), or at ``max_iter``.  Every accepted
    step decreases the objective, so the returned point is the best seen.

    ``inverse_hessian`` optionally seeds the quasi-Newton matrix, normally
    with the one returned by the previous replan of the same robot.
    """
    s = problem.settings
    fz = _NormalizedTime(problem)
    x = np.array(initial, dtype=float)
    f = problem.objective(x)
    if not np.isfinite(f):
        raise ValueError("initial decision has a non-finite objective")
    z = fz.from_decision(x)
    g = _central_difference(fz, z, f)
    n = z.size
    if inverse_hessian is not None and inverse_hessian.shape == (n, n):
        H, fresh = np.array(inverse_hessian, dtype=float), False
    else:
        H, fresh = np.eye(n), True
    stall = 0
    it = 0
    reason = "max_iter"
    while True:
        if np.max(np.abs(g)) <= s.grad_tol * (1.0 + abs(f)):
            reason = "gradient"
            break
        if it >= s.max_iter:
            break
        with np.errstate(over="ignore", invalid="ignore"):
            p = -H @ g
            descent = bool(g @ p < 0) and bool(np.all(np.isfinite(p)))
        if not descent:
            H, fresh = np.eye(n), True
            p = -g
        step, f_new = _line_search(fz, z, f, g, p)
        if step is None and not fresh:
            H, fresh = np.eye(n), True
            step, f_new = _line_search(fz, z, f, g, -g)
        if step is None:
            reason = "line_search"
            break
        it += 1
        z_new = z + step
        g_new = _central_difference(fz, z_new, f_new)
        sk = z_new - z
        yk = g_new - g
        sy = float(sk @ yk)
        if sy > 1e-12 * np.linalg.norm(sk) * np.linalg.norm(yk):
            if fresh:
                H = np.eye(n) * (sy / float(yk @ yk))
                fresh = False
            rho = 1.0 / sy
            Hy = H @ yk
            H = (H - rho * (np.outer(sk, Hy) + np.outer(Hy, sk))
                 + (rho * rho * float(yk @ Hy) + rho) * np.outer(sk, sk))
        stall = stall + 1 if f - f_new < s.stall_tol else 0
        z, f, g = z_new, f_new, g_new
        if stall >= s.stall_iters:
            reason = "stalled"
            break

    x = x if it == 0 else fz.to_decision(z)[0]
    terms, near = problem.cost_terms(x[None])
    breakdown = CostBreakdown(*(float(v) for v in terms[0]))
    return PlanResult(
        trajectory=problem.decode(x),
        objective=breakdown.total,
        iterations=it,
        converged=reason in ("gradient", "stalled"),
        termination=reason,
        breakdown=breakdown,
        decision=x,
        near_contact=near,
        inverse_hessian=H,
    )


def _tie_break_direction(direction: np.ndarray) -> np.ndarray | None:
    """Unit vector right of ``direction`` (z up), tilted up by 45 degrees in 3-D."""
    n = direction.size
    norm = np.linalg.norm(direction)
    if n < 2 or norm < 1e-6:
        return None
    u = direction / norm
    if n == 2:
        return np.array([u[1], -u[0]])
    up = np.zeros(n)
    up[2] = 1.0
    right = np.zeros(n)
    right[:3] = np.cross(u[:3], up[:3])
    if np.linalg.norm(right) < 1e-6:
        # travelling vertically: any horizontal direction is "right"
        right[:3] = np.cross(u[:3], np.eye(3)[0])
        return right / np.linalg.norm(right)
    right /= np.linalg.norm(right)
    # component of "up" orthogonal to the travel direction
    lift = up - u * u[2]
    lift /= np.linalg.norm(lift)
    out = right + lift
    return out / np.linalg.norm(out)


def _hit_end_state(problem: PlanningProblem, T: float) -> QuinticTrajectory:
    """Quintic from the start state reaching the goal position, velocity and
    acceleration at ``T``."""
    s0, goal = problem.state0, problem.goal
    dp = goal.p_end - (s0.p + s0.v * T + 0.5 * s0.a * T**2)
    dv = goal.v_end - (s0.v + s0.a * T)
    da = goal.a_end - s0.a
    M = np.array([[T**3, T**4, T**5],
                  [3 * T**2, 4 * T**3, 5 * T**4],
                  [6 * T, 12 * T**2, 20 * T**3]])
    high = np.linalg.solve(M, np.stack([dp, dv, da]))     # (3, N)
    coeffs = np.column_stack([s0.p, s0.v, 0.5 * s0.a, high.T])
    return QuinticTrajectory(coeffs, T)


def initial_decision(problem: PlanningProblem, warm_start: QuinticTrajectory | None = None,
                     warm_start_age: float = 0.0,
                     predictor_settings: PredictorSettings | None = None) -> np.ndarray:
    t_min = problem.settings.t_min
    if warm_start is not None and warm_start.duration - warm_start_age > t_min:
        guess = refit_from(warm_start, warm_start_age, warm_start.duration - warm_start_age)
        return problem.encode(guess)

    ps = replace(predictor_settings or PredictorSettings(), t_min=t_min)
    guess = predictor.predict(problem.state0, problem.goal.p_end, ps).trajectory
    if not guess.duration > t_min:
        guess = QuinticTrajectory(guess.coeffs, 2.0 * t_min)
    # The time-optimal prediction ignores the dynamic limits; try it
    # stretched in time and keep the cheapest.
    durations = guess.duration * _COLD_STRETCH
    if problem.goal.mode is GoalMode.FULL_REST:
        # the prediction leaves the end velocity free; meet the full end
        # state instead so the seed does not start on the end-penalty wall
        X = np.stack([problem.encode(_hit_end_state(problem, T)) for T in durations])
        x = X[int(np.argmin(problem.objective_batch(X)))]
    else:
        fz = _NormalizedTime(problem)
        Z = np.repeat(fz.from_decision(problem.encode(guess))[None], len(durations), axis=0)
        Z[:, -1] = np.log(durations - t_min)
        x = fz.to_decision(Z[int(np.argmin(fz(Z)))])[0]

    offset = problem.settings.tie_break_offset
    if problem.obstacles and offset > 0:
        side = _tie_break_direction(problem.goal.p_end - problem.state0.p)
        if side is not None:
            # s^3 (1 - s)^2 peaks at 0.03456 (s = 0.6)
            T = t_min + np.exp(x[-1])
            amp = offset / 0.03456
            bump = amp * np.array([1.0 / T**3, -2.0 / T**4, 1.0 / T**5])
            free = x[:-1].reshape(problem.dim, 3) + np.outer(side, bump)
            x = np.concatenate([free.reshape(-1), x[-1:]])
    return x


def plan(state0: RobotState, goal: GoalSpec, obstacles=(), weights: PlannerWeights | None = None,
         limits: DynamicLimits | None = None, warm_start: QuinticTrajectory | None = None,
         warm_start_age: float = 0.0, own_radius: float = 0.3,
         settings: SolverSettings | None = None,
         predictor_settings: PredictorSettings | None = None,
         inverse_hessian: np.ndarray | None = None) -> PlanResult:
    """Plan from ``state0`` to ``goal`` around predicted peer trajectories.

    With a warm start whose remaining duration exceeds ``t_min`` the previous
    plan, re-centred at ``warm_start_age``, seeds the solver; otherwise the
    closed-form prediction of the robot's own trajectory does.
    """
    problem = PlanningProblem(state0, goal, obstacles, own_radius, weights, limits, settings)
    x0 = initial_decision(problem, warm_start, warm_start_age, predictor_settings)
    return solve(x0, problem, inverse_hessian)
