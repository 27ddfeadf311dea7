"""Single-segment quintic trajectories.

Coefficients are stored in ascending monomial order, one row per spatial
dimension: ``coeffs[d, j]`` multiplies ``t**j``.  Time is always local to the
trajectory (``t = 0`` at its start).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

DEGREE = 5
N_COEFFS = DEGREE + 1

# _DERIV_FACTOR[k, j] = j! / (j - k)!  (zero for j < k)
_DERIV_FACTOR = np.array(
    [[factorial(j) / factorial(j - k) if j >= k else 0.0 for j in range(N_COEFFS)]
     for k in range(N_COEFFS)]
)


class TimeRangeError(ValueError):
    """Raised when a time argument falls outside a trajectory's domain."""


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class RobotState:
    """Full third-order state: position, velocity and acceleration."""

    p: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        p = _as_vector(self.p, "p")
        v = _as_vector(self.v, "v")
        a = _as_vector(self.a, "a")
        if not (p.shape == v.shape == a.shape):
            raise ValueError(
                f"state vectors differ in dimension: p{p.shape} v{v.shape} a{a.shape}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "a", a)

    @classmethod
    def at_rest(cls, p) -> "RobotState":
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return cls(p, np.zeros_like(p), np.zeros_like(p))

    @property
    def dim(self) -> int:
        return self.p.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RobotState):
            return NotImplemented
        return (np.array_equal(self.p, other.p) and np.array_equal(self.v, other.v)
                and np.array_equal(self.a, other.a))

    __hash__ = None


@dataclass(frozen=True)
class QuinticTrajectory:
    """Degree-5 polynomial per dimension over ``[0, duration]``."""

    coeffs: np.ndarray
    duration: float

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float, ndmin=2)
        if c.ndim != 2 or c.shape[1] != N_COEFFS:
            raise ValueError(f"coeffs must have shape (N, 6), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        T = float(self.duration)
        if not (np.isfinite(T) and T > 0.0):
            raise ValueError(f"duration must be positive and finite, got {self.duration}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "duration", T)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    def state_at(self, t: float) -> RobotState:
        return RobotState(evaluate(self, t, 0), evaluate(self, t, 1), evaluate(self, t, 2))

    def sample(self, t: float) -> "TrajectorySample":
        return TrajectorySample(t, *(evaluate(self, t, k) for k in range(4)))

    def __eq__(self, other):
        if not isinstance(other, QuinticTrajectory):
            return NotImplemented
        return self.duration == other.duration and np.array_equal(self.coeffs, other.coeffs)

    __hash__ = None


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    j: np.ndarray


def derivative_coeffs(coeffs: np.ndarray, order: int) -> np.ndarray:
    """Coefficients of the ``order``-th derivative, still ascending.

    Works on any array whose last axis holds the 6 monomial coefficients; the
    result has ``6 - order`` entries on that axis.
    """
    return coeffs[..., order:] * _DERIV_FACTOR[order, order:]


def derivatives_batch(coeffs: np.ndarray, t: np.ndarray, orders=(0,)) -> list[np.ndarray]:
    """Derivatives of stacked quintics at stacked times.

    ``coeffs`` has shape ``(..., N, 6)`` and ``t`` shape ``(..., Q)`` with
    broadcast-compatible leading axes; each returned array is ``(..., Q, N)``.
    One power basis is shared by all requested orders.
    """
    t = np.asarray(t, dtype=float)[..., None]
    basis = t ** np.arange(N_COEFFS)
    out = []
    for k in orders:
        dc = derivative_coeffs(coeffs, k)
        out.append(basis[..., : N_COEFFS - k] @ np.swapaxes(dc, -1, -2))
    return out


def polyval_batch(coeffs: np.ndarray, t: np.ndarray, order: int = 0) -> np.ndarray:
    """The ``order``-th derivative; see :func:`derivatives_batch` for shapes."""
    return derivatives_batch(coeffs, t, (order,))[0]


def _check_order(order: int, max_order: int = DEGREE):
    if not isinstance(order, (int, np.integer)) or order < 0 or order > max_order:
        raise ValueError(f"derivative order must be an integer in [0, {max_order}], got {order!r}")


def _check_time(traj: QuinticTrajectory, t: float, name: str = "t"):
    if not (0.0 <= t <= traj.duration):
        raise TimeRangeError(f"{name}={t} outside [0, {traj.duration}]")


def evaluate(traj: QuinticTrajectory, t: float, order: int = 0) -> np.ndarray:
    """Return the ``order``-th time derivative at local time ``t`` (no clamping)."""
    _check_order(order)
    t = float(t)
    _check_time(traj, t)
    dc = derivative_coeffs(traj.coeffs, order)
    out = dc[:, -1].copy()
    for j in range(dc.shape[1] - 2, -1, -1):
        out = out * t + dc[:, j]
    return out


def squared_derivative_integrals(coeffs: np.ndarray, order: int,
                                 t0: np.ndarray | float, t1: np.ndarray | float) -> np.ndarray:
    """Exact ``int_{t0}^{t1} ||x^(order)(t)||^2 dt`` for stacked coefficient arrays.

    ``coeffs`` has shape ``(..., N, 6)``; ``t0``/``t1`` broadcast against the
    leading axes.  The derivative polynomial is squared symbolically and each
    monomial integrated in closed form.
    """
    dc = derivative_coeffs(coeffs, order)
    m = dc.shape[-1]
    powers = np.add.outer(np.arange(m), np.arange(m)) + 1
    t0 = np.asarray(t0, dtype=float)[..., None, None]
    t1 = np.asarray(t1, dtype=float)[..., None, None]
    moments = (t1 ** powers - t0 ** powers) / powers
    return np.einsum("...ni,...ik,...nk->...", dc, moments, dc)


def squared_derivative_integral(traj: QuinticTrajectory, order: int,
                                t0: float, t1: float) -> float:
    _check_order(order, 3)
    if order < 1:
        raise ValueError("order must be in 1..3")
    if t1 < t0:
        raise TimeRangeError(f"t1={t1} < t0={t0}")
    _check_time(traj, t0, "t0")
    _check_time(traj, t1, "t1")
    return float(squared_derivative_integrals(traj.coeffs, order, t0, t1))


def from_boundary(state0: RobotState, betas, T: float) -> QuinticTrajectory:
    """Quintic with the given initial state and per-dimension ``(b1, b2, b3)``.

    Position follows ``b1 t^5/120 + b2 t^4/24 + b3 t^3/6 + a0 t^2/2 + v0 t + p0``.
    """
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    betas = np.asarray(betas, dtype=float).reshape(state0.dim, 3)
    if not np.all(np.isfinite(betas)):
        raise ValueError("betas must be finite")
    coeffs = np.column_stack([
        state0.p, state0.v, state0.a / 2.0,
        betas[:, 2] / 6.0, betas[:, 1] / 24.0, betas[:, 0] / 120.0,
    ])
    return QuinticTrajectory(coeffs, T)


def shift_coeffs(coeffs: np.ndarray, t_shift: float) -> np.ndarray:
    """Re-expand ``x(t_shift + s)`` as a polynomial in ``s``."""
    out = np.zeros_like(coeffs, dtype=float)
    for k in range(N_COEFFS):
        for j in range(k, N_COEFFS):
            out[..., k] += coeffs[..., j] * comb(j, k) * t_shift ** (j - k)
    return out


def refit_from(traj: QuinticTrajectory, t_shift: float, new_T: float) -> QuinticTrajectory:
    """Tail of ``traj`` starting at ``t_shift``, re-timed to last ``new_T``.

    The polynomial itself is unchanged (it is only re-centred), so the state
    at the new ``t = 0`` equals the old state at ``t_shift``.
    """
    if not (0.0 <= t_shift < traj.duration):
        raise TimeRangeError(f"t_shift={t_shift} outside [0, {traj.duration})")
    if not new_T > 0:
        raise ValueError(f"new_T must be positive, got {new_T}")
    if t_shift == 0.0:
        return QuinticTrajectory(traj.coeffs, new_T)
    return QuinticTrajectory(shift_coeffs(traj.coeffs, t_shift), new_T)


def min_pair_distance(traj_a: QuinticTrajectory, traj_b: QuinticTrajectory,
                      dt: float = 0.01) -> float:
    """Approximate minimum distance over the common horizon, sampled every ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    horizon = min(traj_a.duration, traj_b.duration)
    ts = np.arange(0.0, horizon, dt)
    ts = np.append(ts, horizon)
    pa = polyval_batch(traj_a.coeffs, ts)
    pb = polyval_batch(traj_b.coeffs, ts)
    return float(np.min(np.linalg.norm(pa - pb, axis=-1)))
