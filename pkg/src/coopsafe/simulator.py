"""Closed-loop simulation of N Dubins vehicles under the coordinated safety controller."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import coordination as coord
from .grid_hj import TWO_PI, RelDynParams, ValueField, sample_gradients
from .pairwise import avoid_control_from_gradient, relative_states, safety_matrix

log = logging.getLogger(__name__)

DEFAULT_DT = 0.05
DEFAULT_T_MAX = 30.0
DEFAULT_GOAL_RADIUS = 1.0
LIVENESS_GAIN = 2.0


class Method(str, Enum):
    MIP = "mip"
    SAMV = "samv"
    BASELINE = "baseline"


@dataclass
class VehicleState:
    x: float
    y: float
    theta: float
    reached: bool = False

    def __post_init__(self):
        self.theta = float(np.mod(self.theta, TWO_PI))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, float(self.reached)])


def states_to_array(states: Sequence[VehicleState]) -> np.ndarray:
    return np.array([s.as_array() for s in states], dtype=np.float64).reshape(-1, 4)


def array_to_states(arr: np.ndarray) -> list[VehicleState]:
    return [VehicleState(float(r[0]), float(r[1]), float(r[2]), bool(r[3])) for r in arr]


@dataclass
class Scenario:
    initial_states: list[VehicleState]
    targets: np.ndarray
    goal_radius: float = DEFAULT_GOAL_RADIUS
    params: RelDynParams = field(default_factory=RelDynParams)
    capture_radius: float = 5.0
    K: float = 1.5

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.float64).reshape(-1, 2)
        if self.N < 2:
            raise ValueError("a scenario needs at least two vehicles")
        if len(self.targets) != self.N:
            raise ValueError("one target per vehicle")
        if self.goal_radius <= 0:
            raise ValueError("goal_radius must be positive")

    @property
    def N(self) -> int:
        return len(self.initial_states)


@dataclass
class TraceRecord:
    time: float
    states: np.ndarray          # (N, 4): x, y, theta, reached
    assignment: np.ndarray      # (N, N) int8
    controls: np.ndarray        # (N,) turn rates, NaN for reached vehicles
    violations: frozenset       # unordered pairs (i, j), i < j


@dataclass
class Metrics:
    success_ratio: float
    aggregate_conflict_ratio: float
    arrival_times: list
    timesteps: int
    violation_count: int


def wrap_to_pi(a):
    """Wrap to ``(-pi, pi]``; an error of exactly pi stays ``+pi``."""
    return np.pi - np.mod(np.pi - a, TWO_PI)


def liveness_control(state, target, max_turn_rate: float, gain: float = LIVENESS_GAIN) -> float:
    """Saturated proportional steering toward ``target``."""
    if isinstance(state, VehicleState):
        x, y, th = state.x, state.y, state.theta
    else:
        x, y, th = state[0], state[1], state[2]
    bearing = math.atan2(target[1] - y, target[0] - x)
    err = float(wrap_to_pi(bearing - th))
    return float(np.clip(gain * err, -max_turn_rate, max_turn_rate))


def step_array(arr: np.ndarray, controls: np.ndarray, dt: float, v: float) -> np.ndarray:
    """Exact constant-turn-rate update of an (N, 4) state array; reached rows are frozen."""
    out = arr.copy()
    moving = arr[:, 3] < 0.5
    x, y, th = arr[moving, 0], arr[moving, 1], arr[moving, 2]
    w = np.asarray(controls, dtype=np.float64)[moving]
    turning = np.abs(w) > 1e-12
    th_new = th + w * dt
    ws = np.where(turning, w, 1.0)
    dx = np.where(turning, v / ws * (np.sin(th_new) - np.sin(th)), v * dt * np.cos(th))
    dy = np.where(turning, v / ws * (np.cos(th) - np.cos(th_new)), v * dt * np.sin(th))
    out[moving, 0] = x + dx
    out[moving, 1] = y + dy
    out[moving, 2] = np.mod(th_new, TWO_PI)
    return out


def step(states: Sequence[VehicleState], controls, dt: float, v: float) -> list[VehicleState]:
    if dt <= 0:
        raise ValueError("dt must be positive")
    return array_to_states(step_array(states_to_array(states), np.asarray(controls, float), dt, v))


def avoid_control_matrix(field: ValueField, poses: np.ndarray, mask: np.ndarray,
                         max_turn_rate: float) -> np.ndarray:
    """Avoidance turn rate of ``i`` against ``j`` for every masked ordered pair (NaN elsewhere)."""
    n = len(poses)
    ctrl = np.full((n, n), np.nan)
    ii, jj = np.nonzero(mask)
    if len(ii) == 0:
        return ctrl
    rel = relative_states(poses[:, :3])[ii, jj]
    grads, inside = sample_gradients(field, rel)
    for k, (i, j) in enumerate(zip(ii, jj)):
        if inside[k]:
            ctrl[i, j] = avoid_control_from_gradient(grads[k], rel[k], max_turn_rate)
    return ctrl


def decide_controls(states, field: ValueField, scenario: Scenario, method: Method | str):
    """One decision of the coordination pipeline.

    Returns ``(U, controls)``; reached vehicles get a NaN control and never
    appear in ``U``.
    """
    method = Method(method)
    arr = states if isinstance(states, np.ndarray) else states_to_array(states)
    n = len(arr)
    active = arr[:, 3] < 0.5
    wbar = scenario.params.max_turn_rate
    S = safety_matrix(field, arr[:, :3], active)
    conflict = S <= scenario.K

    if method is Method.BASELINE:
        U = coord.baseline_assignment(S, scenario.K, active)
        ctrl = avoid_control_matrix(field, arr, U.astype(bool), wbar)
    else:
        ctrl = avoid_control_matrix(field, arr, conflict, wbar)
        P = coord.priority_matrix(n)
        reward = coord.build_reward_matrix(P, S, scenario.K, active)
        if method is Method.SAMV:
            groups = []
            for i in range(n):
                g: dict[float, set[int]] = {}
                for j in np.nonzero(conflict[i])[0]:
                    if np.isfinite(ctrl[i, j]):
                        g.setdefault(float(ctrl[i, j]), set()).add(int(j))
                groups.append(g)
            instance = coord.samv_modify(reward, groups)
        else:
            instance = coord.MipInstance(reward)
        U, _ = coord.solve_mip(instance)

    controls = np.full(n, np.nan)
    for i in range(n):
        if not active[i]:
            continue
        row = np.nonzero(U[i])[0]
        if len(row):
            controls[i] = ctrl[i, row[0]]
        else:
            controls[i] = liveness_control(arr[i], scenario.targets[i], wbar)
    return U, controls


def pairwise_violations(arr: np.ndarray, radius: float) -> frozenset:
    active = np.nonzero(arr[:, 3] < 0.5)[0]
    pts = arr[active, :2]
    d = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    ii, jj = np.nonzero(np.triu(d <= radius, k=1))
    return frozenset((int(active[a]), int(active[b])) for a, b in zip(ii, jj))


def compute_metrics(trace: Sequence[TraceRecord], n: int, arrival_times: Sequence) -> Metrics:
    steps = len(trace)
    violated = set()
    count = 0
    for rec in trace:
        count += len(rec.violations)
        for pair in rec.violations:
            violated.update(pair)
    ok = [arrival_times[i] is not None and i not in violated for i in range(n)]
    pairs = n * (n - 1) // 2
    return Metrics(success_ratio=sum(ok) / n,
                   aggregate_conflict_ratio=count / (steps * pairs) if steps else 0.0,
                   arrival_times=list(arrival_times), timesteps=steps, violation_count=count)


def run_scenario(scenario: Scenario, field: ValueField, method: Method | str = Method.MIP,
                 dt: float = DEFAULT_DT, t_max: float = DEFAULT_T_MAX,
                 violation_radius: float | None = None):
    """Simulate until every vehicle is at its target or ``t_max`` elapses.

    A pair counts as violating at a record when its distance is at most
    ``violation_radius`` (defaults to the capture radius).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    radius = scenario.capture_radius if violation_radius is None else violation_radius
    n = scenario.N
    v = scenario.params.speed
    arr = states_to_array(scenario.initial_states)
    arrival: list = [None] * n
    trace: list[TraceRecord] = []
    n_steps = int(math.floor(t_max / dt + 1e-9))

    def mark_arrivals(arr, t):
        d = np.hypot(arr[:, 0] - scenario.targets[:, 0], arr[:, 1] - scenario.targets[:, 1])
        for i in np.nonzero((arr[:, 3] < 0.5) & (d <= scenario.goal_radius))[0]:
            arr[i, 3] = 1.0
            arrival[i] = t

    mark_arrivals(arr, 0.0)
    for k in range(n_steps + 1):
        t = k * dt
        if np.all(arr[:, 3] > 0.5) or k == n_steps:
            U = np.zeros((n, n), dtype=np.int8)
            controls = np.full(n, np.nan)
            trace.append(TraceRecord(t, arr.copy(), U, controls, pairwise_violations(arr, radius)))
            break
        U, controls = decide_controls(arr, field, scenario, method)
        trace.append(TraceRecord(t, arr.copy(), U, controls, pairwise_violations(arr, radius)))
        arr = step_array(arr, np.nan_to_num(controls), dt, v)
        mark_arrivals(arr, (k + 1) * dt)
    return trace, compute_metrics(trace, n, arrival)


def spawn_radius(n: int) -> float:
    return 10.0 + 2.0 * (n - 3)


def random_scenario(n: int, seed: int | None = None,
                    radius_rule: Callable[[int], float] = spawn_radius,
                    perturbation: tuple[float, float] = (1.0, 0.2),
                    **scenario_kwargs) -> Scenario:
    """Vehicles evenly spaced on a circle facing its center, targets antipodal.

    ``perturbation`` is ``(position, heading)``: uniform noise half-widths added
    to each coordinate and to the heading.
    """
    if n < 2:
        raise ValueError("need at least two vehicles")
    rng = np.random.default_rng(seed)
    r = radius_rule(n)
    pos_noise, head_noise = perturbation
    angles = TWO_PI * np.arange(n) / n
    base = r * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    dpos = rng.uniform(-pos_noise, pos_noise, size=(n, 2)) if pos_noise else np.zeros((n, 2))
    dhead = rng.uniform(-head_noise, head_noise, size=n) if head_noise else np.zeros(n)
    states = [VehicleState(base[i, 0] + dpos[i, 0], base[i, 1] + dpos[i, 1],
                           angles[i] + np.pi + dhead[i]) for i in range(n)]
    return Scenario(states, -base, **scenario_kwargs)


def trial_seed(base_seed: int, n: int, trial: int) -> int:
    return base_seed + 10_000 * n + trial


def _run_trial(args):
    n, method, seed, field, dt, t_max, violation_radius, scenario_kwargs = args
    try:
        sc = random_scenario(n, seed, **scenario_kwargs)
        _, m = run_scenario(sc, field, method, dt, t_max, violation_radius)
        return m, None
    except Exception as exc:  # recorded, never aborts the batch
        log.exception("trial n=%d method=%s seed=%d failed", n, method, seed)
        return None, repr(exc)


def batch_run(n_list: Sequence[int], trials: int, base_seed: int, methods: Sequence[Method | str],
              field: ValueField, dt: float = DEFAULT_DT, t_max: float = DEFAULT_T_MAX,
              violation_radius: float | None = None, workers: int | None = None,
              **scenario_kwargs) -> list[dict]:
    """Mean metrics per ``(N, method)``; every method sees the same seeds.

    ``workers`` defaults to the ``COOPSAFE_WORKERS`` environment variable (1 if unset).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if workers is None:
        workers = int(os.environ.get("COOPSAFE_WORKERS", "1"))
    rows = []
    for n in n_list:
        for method in methods:
            method = Method(method)
            jobs = [(n, method, trial_seed(base_seed, n, t), field, dt, t_max, violation_radius,
                     scenario_kwargs) for t in range(trials)]
            if workers > 1:
                with ProcessPoolExecutor(workers) as ex:
                    results = list(ex.map(_run_trial, jobs))
            else:
                results = [_run_trial(j) for j in jobs]
            ok = [m for m, err in results if m is not None]
            errors = [err for m, err in results if err is not None]
            rows.append({
                "N": n, "method": method.value, "trials": trials, "base_seed": base_seed,
                "completed": len(ok), "errors": errors,
                "success_ratio": float(np.mean([m.success_ratio for m in ok])) if ok else float("nan"),
                "conflict_ratio": float(np.mean([m.aggregate_conflict_ratio for m in ok])) if ok else float("nan"),
            })
            log.info("N=%d %s success=%.3f conflict=%.4f", n, method.value,
                     rows[-1]["success_ratio"], rows[-1]["conflict_ratio"])
    return rows
