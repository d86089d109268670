"""End-to-end acceptance criteria; each prints one PASS/FAIL line.

Run with pytest (lines are repeated in the terminal summary) or directly:
``python tests/test_acceptance.py``.
"""

import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from coopsafe import coordination, simulator  # noqa: E402
from coopsafe.grid_hj import (Grid3, hamiltonian, sample_gradients, sample_value,  # noqa: E402
                              signed_distance_cylinder, solve_brs)
from coopsafe.pairwise import (avoid_control_from_gradient, relative_state,  # noqa: E402
                               worst_case_opponent_control)
from coopsafe.persistence import load_brs, save_brs  # noqa: E402

from conftest import ACCEPTANCE_LINES, COARSE_GRID, K, PARAMS, R_C  # noqa: E402
from oracles import capture_oracle, escape_oracle, maxmin_oracle, relative_fd_error  # noqa: E402

MARGIN = 0.2
VIOLATION_RADIUS = R_C - MARGIN

pytestmark = pytest.mark.acceptance


def report(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return passed


# -- criteria -----------------------------------------------------------------

def criterion_1(field):
    t0 = time.perf_counter()
    rows = simulator.batch_run([3], 200, 0, ["mip", "samv"], field,
                               violation_radius=VIOLATION_RADIUS)
    per = []
    ok = True
    for r in rows:
        ok &= r["completed"] == 200 and r["success_ratio"] == 1.0 and r["conflict_ratio"] == 0.0
        per.append(f"{r['method']} success={r['success_ratio']:.6f} conflict={r['conflict_ratio']:.6f}")
    wall = time.perf_counter() - t0
    ok &= wall / 2 <= 600
    return report(1, "three-vehicle safety (200 trials, N=3)", ok, "; ".join(per) + f" ({wall:.0f}s)")


def criterion_2():
    t0 = time.perf_counter()
    rep = coordination.verify_theorem1()
    wall = time.perf_counter() - t0
    ok = rep.passed and rep.checked == 64 and wall < 1.0
    return report(2, "exclusive-avoidance enumeration", ok,
                  f"{rep.checked} patterns, {len(rep.counterexamples)} counterexamples ({wall:.3f}s)")


def criterion_3():
    t0 = time.perf_counter()
    rep = coordination.verify_theorem2()
    wall = time.perf_counter() - t0
    want = {"i": [91.0], "ii_c31_pos": [90.0], "ii_c31_neg": [74.0], "iii_example": [70.0]}
    ok = rep.passed and rep.notes.get("optima") == want and wall < 1.0
    return report(3, "merged-avoidance case optima", ok,
                  f"optima {rep.notes.get('optima')}, {len(rep.counterexamples)} counterexamples ({wall:.3f}s)")


def criterion_4():
    t0 = time.perf_counter()
    rep = coordination.verify_mip_oracle(500, seed=0)
    wall = time.perf_counter() - t0
    ok = rep.passed and rep.checked == 500 and wall < 30.0
    return report(4, "MIP solver exactness", ok,
                  f"{rep.checked} instances, {len(rep.counterexamples)} mismatches ({wall:.1f}s)")


def criterion_5(coarse_field):
    grid = Grid3.default()
    worst_increase = [-np.inf]

    def watch(it, old, new):
        worst_increase[0] = max(worst_increase[0], float(np.max(new - old)))

    t0 = time.perf_counter()
    f = solve_brs(signed_distance_cylinder(grid, R_C), PARAMS, 1e-3, 20000, on_sweep=watch)
    wall = time.perf_counter() - t0

    rng = np.random.default_rng(0)
    ham_err = 0.0
    for _ in range(1000):
        state = (rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(0, 2 * np.pi))
        costate = rng.normal(size=3)
        ham_err = max(ham_err, abs(hamiltonian(state, costate, PARAMS) - maxmin_oracle(state, costate, PARAMS)))

    close, far = (6.0, 0.0, np.pi), (40.0, 0.0, 0.0)
    v_close = sample_value(f, close)
    v_far = sample_value(coarse_field, far)
    caught = capture_oracle(close, R_C)
    escape_d = escape_oracle(far, R_C)

    checks = {
        "monotone": worst_increase[0] <= 0.0,
        "residual": f.converged and f.convergence_residual < 1e-3,
        "hamiltonian": ham_err < 1e-6,
        "head-on": v_close <= 0 and caught,
        "far": v_far > 0 and escape_d > R_C,
        "time": wall < 300,
    }
    detail = (f"max sweep increase {worst_increase[0]:.1e}, residual {f.convergence_residual:.2e}, "
              f"|H - oracle| {ham_err:.1e}, V(6,0,pi)={v_close:.2f} (oracle caught={caught}), "
              f"V(40,0,0)={v_far:.2f} on {COARSE_GRID.dims} +-45 (oracle min dist {escape_d:.1f}), "
              f"solve {wall:.0f}s")
    failed = [k for k, v in checks.items() if not v]
    return report(5, "value-function solver properties", not failed,
                  detail + (f"; failed: {failed}" if failed else ""))


def criterion_6(field, runs=100, horizon=15.0, dt=0.05, seed=0):
    rng = np.random.default_rng(seed)
    wbar = PARAMS.max_turn_rate
    mins = []
    for _ in range(runs):
        # start in potential conflict but with positive margin: 0.3 <= s <= K
        while True:
            rel = np.array([rng.uniform(-15, 15), rng.uniform(-15, 15), rng.uniform(0, 2 * np.pi)])
            if 0.3 <= sample_value(field, rel) <= K:
                break
        arr = np.array([[0.0, 0.0, 0.0, 0.0], [rel[0], rel[1], rel[2], 0.0]])
        dmin = np.inf
        for _ in range(int(round(horizon / dt))):
            r = relative_state(arr[0], arr[1])
            g, inside = sample_gradients(field, r)
            if inside[0]:
                w = [avoid_control_from_gradient(g[0], r, wbar), worst_case_opponent_control(g[0], wbar)]
            else:
                w = [0.0, 0.0]
            arr = simulator.step_array(arr, np.array(w), dt, PARAMS.speed)
            dmin = min(dmin, float(np.hypot(*(arr[0, :2] - arr[1, :2]))))
        mins.append(dmin)
    mins = np.array(mins)
    bad = int(np.sum(mins < VIOLATION_RADIUS))
    return report(6, "adversarial pairwise safety", bad == 0,
                  f"{runs} runs, min distance {mins.min():.3f} (limit {VIOLATION_RADIUS}), {bad} below")


def criterion_7(field, trials=50):
    rows = simulator.batch_run(range(3, 9), trials, 0, ["mip", "baseline"], field,
                               violation_radius=VIOLATION_RADIUS)
    by = {(r["N"], r["method"]): r["success_ratio"] for r in rows}
    ok = all(by[(n, "mip")] >= by[(n, "baseline")] for n in range(3, 9))
    ok &= by[(3, "mip")] > by[(3, "baseline")]
    detail = ", ".join(f"N={n}: {by[(n, 'mip')]:.2f} vs {by[(n, 'baseline')]:.2f}" for n in range(3, 9))
    return report(7, "MIP vs baseline success (mip vs baseline)", ok, detail)


def criterion_8():
    dts = (1e-2, 5e-3, 2.5e-3)
    errs = [relative_fd_error(dt, PARAMS) for dt in dts]
    slopes = np.diff(np.log(errs)) / np.diff(np.log(dts))
    ok = bool(np.all(np.abs(slopes - 1.0) < 0.1))
    return report(8, "relative-frame consistency", ok,
                  f"errors {[f'{e:.2e}' for e in errs]}, slopes {np.round(slopes, 3).tolist()}")


def criterion_9(field, tmp_dir):
    p1, p2 = Path(tmp_dir) / "a.bin", Path(tmp_dir) / "b.bin"
    save_brs(field, p1)
    loaded = load_brs(p1)
    save_brs(loaded, p2)
    same_file = p1.read_bytes() == p2.read_bytes()
    same_vals = np.array_equal(loaded.values, field.values)
    a = simulator.batch_run([3, 4], 5, 11, ["mip", "samv", "baseline"], field,
                            violation_radius=VIOLATION_RADIUS)
    b = simulator.batch_run([3, 4], 5, 11, ["mip", "samv", "baseline"], field,
                            violation_radius=VIOLATION_RADIUS)
    ok = same_file and same_vals and a == b
    return report(9, "persistence round trip and batch determinism", ok,
                  f"bitwise file match={same_file}, values match={same_vals}, batch rows identical={a == b}")


# -- pytest entry points ------------------------------------------------------

def test_criterion_1_three_vehicle_safety(field):
    assert criterion_1(field)


def test_criterion_2_exclusive_avoidance_enumeration():
    assert criterion_2()


def test_criterion_3_merged_avoidance_optima():
    assert criterion_3()


def test_criterion_4_mip_exactness():
    assert criterion_4()


def test_criterion_5_solver_properties(coarse_field):
    assert criterion_5(coarse_field)


def test_criterion_6_adversarial_pairwise_safety(field):
    assert criterion_6(field)


def test_criterion_7_dominance_over_baseline(field):
    assert criterion_7(field)


def test_criterion_8_relative_frame_consistency():
    assert criterion_8()


def test_criterion_9_persistence_and_determinism(field, tmp_path):
    assert criterion_9(field, tmp_path)


if __name__ == "__main__":
    import tempfile

    def solve(grid):
        return solve_brs(signed_distance_cylinder(grid, R_C), PARAMS, 1e-3, 20000)

    brs = Path(sys.argv[1]) if len(sys.argv) > 1 else None
    field = load_brs(brs) if brs else solve(Grid3.default())
    coarse = solve(COARSE_GRID)
    with tempfile.TemporaryDirectory() as tmp:
        results = [criterion_1(field), criterion_2(), criterion_3(), criterion_4(), criterion_5(coarse),
                   criterion_6(field), criterion_7(field), criterion_8(), criterion_9(field, tmp)]
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
