"""Closed-form minimum time-jerk prediction for peer robots.

A peer is modelled as a triple integrator driven by jerk.  Given its full
current state and a goal *position* (end velocity and acceleration free), the
optimal trajectory for a fixed duration ``T`` is a quintic whose jerk is

    u(t) = 10 * delta * (t - T)**2 / T**5,
    delta = p_end - (p0 + v0*T + a0*T**2/2),

so the objective ``J(T) = int ||u||^2 dt + T`` reduces to
``20 * sum(delta**2) / T**5 + T``.  The free-final-time condition (Hamiltonian
identically zero) is ``dJ/dT = 0``; multiplied by ``T**6`` it is the sextic

    T**6 - sum_d delta_d * (100*delta_d + 40*v0_d*T + 40*a0_d*T**2) = 0.

Every real positive root is a stationary point of ``J``; the cheapest wins.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .trajectory import (
    QuinticTrajectory,
    RobotState,
    from_boundary,
    squared_derivative_integral,
)

T_MIN = 0.05


class PredictionMethod(str, enum.Enum):
    TRANSVERSALITY_ROOT = "transversality_root"
    CONSTANT_JERK_FALLBACK = "constant_jerk_fallback"


@dataclass(frozen=True)
class PredictorSettings:
    t_min: float = T_MIN
    # Stand-in jerk for the constant-jerk fallback: twice the default jerk limit.
    j_nominal: float = 16.0
    imag_tol: float = 1e-8
    trim_tol: float = 1e-12

    def __post_init__(self):
        if not self.t_min > 0:
            raise ValueError("t_min must be positive")
        if not self.j_nominal > 0:
            raise ValueError("j_nominal must be positive")


@dataclass(frozen=True)
class PredictionResult:
    trajectory: QuinticTrajectory
    duration: float
    cost: float
    method: PredictionMethod


def _displacement(state0: RobotState, p_end) -> np.ndarray:
    p_end = np.asarray(p_end, dtype=float).reshape(-1)
    if p_end.shape != state0.p.shape:
        raise ValueError(f"p_end has dimension {p_end.size}, state has {state0.dim}")
    if not np.all(np.isfinite(p_end)):
        raise ValueError("p_end must be finite")
    return p_end - state0.p


def betas_for_duration(state0: RobotState, p_end, T: float) -> np.ndarray:
    """Per-dimension ``(b1, b2, b3)`` for the free-end-state optimum of duration ``T``.

    Returns an ``(N, 3)`` array.  The terminal costates on velocity and
    acceleration vanish, which forces ``b2 = -b1*T`` and ``b3 = b1*T**2/2``.
    """
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    delta = _displacement(state0, p_end) - state0.v * T - 0.5 * state0.a * T**2
    return np.column_stack([20.0 * delta / T**5, -20.0 * delta / T**4, 10.0 * delta / T**3])


def duration_polynomial(state0: RobotState, p_end) -> np.ndarray:
    """Ascending coefficients ``[c0, ..., c6]`` of the free-final-time sextic in ``T``."""
    P = _displacement(state0, p_end)
    v0, a0 = state0.v, state0.a
    poly = np.zeros(7)
    poly[6] = 1.0
    for P_d, v_d, a_d in zip(P, v0, a0):
        delta = np.array([P_d, -v_d, -0.5 * a_d])
        weighted = np.array([100.0 * P_d, -60.0 * v_d, -10.0 * a_d])
        poly[:5] -= np.convolve(delta, weighted)
    return poly


def real_positive_roots(poly, t_min: float = T_MIN, imag_tol: float = 1e-8,
                        trim_tol: float = 1e-12) -> list[float]:
    """Real roots above ``t_min`` of an ascending-coefficient polynomial, sorted.

    Roots are the eigenvalues of the companion matrix, each polished with a
    couple of Newton steps.
    """
    c = np.asarray(poly, dtype=float)
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0.0:
        raise ValueError("polynomial is identically zero")
    nz = np.nonzero(np.abs(c) > trim_tol * scale)[0]
    c = c[: nz[-1] + 1]
    deg = c.size - 1
    if deg == 0:
        return []
    monic = c[:-1] / c[-1]
    companion = np.zeros((deg, deg))
    companion[1:, :-1] = np.eye(deg - 1)
    companion[:, -1] = -monic
    eig = np.linalg.eigvals(companion)
    dpoly = c[1:] * np.arange(1, deg + 1)
    roots = []
    for z in eig:
        if abs(z.imag) > imag_tol * (1.0 + abs(z.real)):
            continue
        r = z.real
        for _ in range(2):
            d = np.polynomial.polynomial.polyval(r, dpoly)
            if d == 0.0:
                break
            step = np.polynomial.polynomial.polyval(r, c) / d
            if not np.isfinite(step) or abs(step) > 1e-3 * (1.0 + abs(r)):
                break
            r -= step
        if r > t_min:
            roots.append(float(r))
    return sorted(roots)


def trajectory_cost(traj: QuinticTrajectory) -> float:
    """``int_0^T ||jerk||^2 dt + T``."""
    return squared_derivative_integral(traj, 3, 0.0, traj.duration) + traj.duration


def fallback_duration(state0: RobotState, p_end, j_nominal: float,
                      t_min: float = T_MIN) -> float:
    """Duration under a constant-jerk assumption.

    Solves ``|dp| = |v0| T + |a0| T**2 / 2 + j_nominal T**3 / 6`` for its single
    positive root (the right-hand side is increasing in ``T``).
    """
    if not j_nominal > 0:
        raise ValueError("j_nominal must be positive")
    dist = float(np.linalg.norm(_displacement(state0, p_end)))
    if dist == 0.0:
        return t_min
    speed = float(np.linalg.norm(state0.v))
    accel = float(np.linalg.norm(state0.a))

    def residual(T):
        return speed * T + 0.5 * accel * T**2 + j_nominal * T**3 / 6.0 - dist

    hi = 1.0
    while residual(hi) < 0.0:
        hi *= 2.0
    T = brentq(residual, 0.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    return max(T, t_min)


def predict(state0: RobotState, p_end, settings: PredictorSettings | None = None) -> PredictionResult:
    """Least-cost free-final-time trajectory from ``state0`` to position ``p_end``."""
    settings = settings or PredictorSettings()
    p_end = np.asarray(p_end, dtype=float).reshape(-1)
    _displacement(state0, p_end)

    best = None
    roots = real_positive_roots(duration_polynomial(state0, p_end), settings.t_min,
                                settings.imag_tol, settings.trim_tol)
    for T in roots:
        traj = from_boundary(state0, betas_for_duration(state0, p_end, T), T)
        cost = trajectory_cost(traj)
        if best is None or cost < best.cost:
            best = PredictionResult(traj, T, cost, PredictionMethod.TRANSVERSALITY_ROOT)
    if best is not None:
        return best

    T = fallback_duration(state0, p_end, settings.j_nominal, settings.t_min)
    traj = from_boundary(state0, betas_for_duration(state0, p_end, T), T)
    return PredictionResult(traj, T, trajectory_cost(traj), PredictionMethod.CONSTANT_JERK_FALLBACK)
