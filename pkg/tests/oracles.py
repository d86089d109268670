"""Independent reference computations shared by the unit and acceptance tests."""

import itertools
import math

import numpy as np

from coopsafe.grid_hj import relative_dynamics
from coopsafe.pairwise import relative_state
from coopsafe.simulator import step_array

TWO_PI = 2 * np.pi


def maxmin_oracle(state, costate, params, n=201):
    """max over w_i of min over w_j of costate . f, on an n x n control grid."""
    w = np.linspace(-params.max_turn_rate, params.max_turn_rate, n)
    wi, wj = np.meshgrid(w, w, indexing="ij")
    f = relative_dynamics(state, wi, wj, params)
    val = sum(c * fk for c, fk in zip(costate, f))
    return val.min(axis=1).max()


def pair_from_relative(rel):
    """World-frame (2, 4) array: i at the origin facing +x, j at ``rel``."""
    return np.array([[0.0, 0.0, 0.0, 0.0], [rel[0], rel[1], rel[2], 0.0]])


def bearing_turn(me, other, wbar, away=False, gain=3.0):
    b = math.atan2(other[1] - me[1], other[0] - me[0]) + (math.pi if away else 0.0)
    err = (b - me[2] + math.pi) % TWO_PI - math.pi
    return float(np.clip(gain * err, -wbar, wbar))


def _caught(rel, plan, radius, dt=0.01, horizon=3.0):
    arr = pair_from_relative(rel)
    t, seg, seg_end = 0.0, 0, plan[0][0]
    while t < horizon:
        if t >= seg_end and seg + 1 < len(plan):
            seg += 1
            seg_end += plan[seg][0]
        w = np.array([plan[seg][1], bearing_turn(arr[1], arr[0], 1.0)])
        arr = step_array(arr, w, dt, 5.0)
        t += dt
        if np.hypot(*(arr[0, :2] - arr[1, :2])) <= radius:
            return True
    return False


def capture_oracle(rel, radius):
    """True if a pure-pursuit opponent catches every two-segment evader plan."""
    turns = (-1.0, -0.5, 0.0, 0.5, 1.0)
    return all(_caught(rel, [(0.1, a), (3.0, b)], radius) for a, b in itertools.product(turns, repeat=2))


def escape_oracle(rel, radius, horizon=10.0, dt=0.01):
    """Smallest distance reached when i flees straight away from j, over a family of
    opponents that first commit to a fixed turn and then pursue."""
    worst = np.inf
    for w0, t0 in itertools.product((-1.0, 0.0, 1.0), (0.0, 1.0, np.pi, 5.0)):
        arr = pair_from_relative(rel)
        for k in range(int(round(horizon / dt))):
            w_i = bearing_turn(arr[0], arr[1], 1.0, away=True)
            w_j = w0 if k * dt < t0 else bearing_turn(arr[1], arr[0], 1.0)
            arr = step_array(arr, np.array([w_i, w_j]), dt, 5.0)
            worst = min(worst, np.hypot(*(arr[0, :2] - arr[1, :2])))
    return worst


def relative_fd_error(dt, params, trials=20, seed=0):
    """Largest gap between a forward difference of the relative state and its dynamics."""
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(trials):
        arr = np.column_stack([rng.uniform(-10, 10, (2, 2)), rng.uniform(0, TWO_PI, 2), np.zeros(2)])
        w = rng.uniform(-1, 1, 2)
        r0 = np.array(relative_state(arr[0], arr[1]))
        r1 = np.array(relative_state(*step_array(arr, w, dt, params.speed)))
        d = r1 - r0
        d[2] = (d[2] + np.pi) % TWO_PI - np.pi
        errs.append(np.max(np.abs(d / dt - relative_dynamics(r0, w[0], w[1], params))))
    return max(errs)
