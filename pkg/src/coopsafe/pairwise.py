"""World-frame vehicle pairs mapped onto the pairwise value function.

Convention: the relative state of ``j`` with respect to ``i`` is the position of
``j`` rotated into ``i``'s body frame, with heading ``theta_j - theta_i``.  This
is the only frame in which the relative dynamics used for the value function
hold along actual two-vehicle trajectories.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .grid_hj import (TWO_PI, OutOfGridError, RelDynParams, ValueField, sample_gradients,
                      sample_values)


class RelativeState(NamedTuple):
    p_x: float
    p_y: float
    theta: float


class SafetyAssessment(NamedTuple):
    safety_level: float
    in_conflict: bool
    avoid_control: float | None


def wrap_angle(a):
    """Wrap to ``[0, 2*pi)``."""
    return np.mod(a, TWO_PI)


def _pose(x):
    # VehicleState or any (x, y, theta, ...) sequence
    if hasattr(x, "theta"):
        return x.x, x.y, x.theta
    return x[0], x[1], x[2]


def relative_state(x_i, x_j) -> RelativeState:
    xi, yi, ti = _pose(x_i)
    xj, yj, tj = _pose(x_j)
    dx, dy = xj - xi, yj - yi
    c, s = np.cos(ti), np.sin(ti)
    return RelativeState(c * dx + s * dy, -s * dx + c * dy, float(wrap_angle(tj - ti)))


def relative_states(poses: np.ndarray) -> np.ndarray:
    """All ordered pairs at once: ``out[i, j]`` is the state of ``j`` relative to ``i``."""
    poses = np.asarray(poses, dtype=np.float64)
    x, y, th = poses[:, 0], poses[:, 1], poses[:, 2]
    dx = x[None, :] - x[:, None]
    dy = y[None, :] - y[:, None]
    c, s = np.cos(th)[:, None], np.sin(th)[:, None]
    return np.stack([c * dx + s * dy, -s * dx + c * dy,
                     wrap_angle(th[None, :] - th[:, None])], axis=-1)


def safety_level(field: ValueField, x_i, x_j) -> float:
    """Value at the pair's relative state; ``+inf`` when off the grid (treated as safe)."""
    vals, inside = sample_values(field, relative_state(x_i, x_j))
    return float(vals[0]) if inside[0] else float("inf")


def safety_matrix(field: ValueField, poses: np.ndarray, active=None) -> np.ndarray:
    """``S[i, j] = s_ij`` for all ordered pairs; diagonal and inactive entries are ``+inf``."""
    poses = np.asarray(poses, dtype=np.float64)
    n = len(poses)
    rel = relative_states(poses).reshape(-1, 3)
    vals, inside = sample_values(field, rel)
    S = np.where(inside, vals, np.inf).reshape(n, n)
    np.fill_diagonal(S, np.inf)
    if active is not None:
        active = np.asarray(active, dtype=bool)
        S[~active, :] = np.inf
        S[:, ~active] = np.inf
    return S


def avoid_control_from_gradient(grad, rel, max_turn_rate: float) -> float:
    """Bang-bang maximizer of the evader's term; ties go to ``+max_turn_rate``."""
    g1, g2, g3 = grad
    switch = g1 * rel[1] - g2 * rel[0] - g3
    return max_turn_rate if switch >= 0 else -max_turn_rate


def worst_case_opponent_control(grad, max_turn_rate: float) -> float:
    """Pursuer's minimizing turn rate for the same gradient."""
    return -max_turn_rate if grad[2] >= 0 else max_turn_rate


def optimal_avoid_control(field: ValueField, x_i, x_j, params: RelDynParams) -> float:
    rel = relative_state(x_i, x_j)
    grad, inside = sample_gradients(field, rel)
    if not inside[0]:
        raise OutOfGridError("no avoidance control outside the value-function grid")
    return avoid_control_from_gradient(grad[0], rel, params.max_turn_rate)


def assess(field: ValueField, x_i, x_j, params: RelDynParams, K: float) -> SafetyAssessment:
    s = safety_level(field, x_i, x_j)
    ctrl = optimal_avoid_control(field, x_i, x_j, params) if np.isfinite(s) else None
    return SafetyAssessment(s, bool(s <= K), ctrl)


def potential_conflict_sets(safety: np.ndarray, K: float) -> list[set[int]]:
    """``F_i = {j != i : s_ij <= K}`` from a precomputed safety matrix."""
    safety = np.asarray(safety)
    n = len(safety)
    return [{j for j in range(n) if j != i and safety[i, j] <= K} for i in range(n)]


def potential_conflict_set(field: ValueField, states: Sequence, K: float) -> list[set[int]]:
    poses = np.array([_pose(s) for s in states], dtype=np.float64)
    return potential_conflict_sets(safety_matrix(field, poses), K)


def common_control_sets(i: int, states: Sequence, field: ValueField, params: RelDynParams,
                        K: float, conflict_set=None) -> dict[float, set[int]]:
    """Split ``F_i`` by the avoidance control vehicle ``i`` would use against each member.

    Returns at most two groups keyed by ``+max_turn_rate`` / ``-max_turn_rate``.
    """
    if conflict_set is None:
        conflict_set = potential_conflict_set(field, states, K)[i]
    groups: dict[float, set[int]] = {}
    for j in sorted(conflict_set):
        u = optimal_avoid_control(field, states[i], states[j], params)
        groups.setdefault(u, set()).add(j)
    return groups
