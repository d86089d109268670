import numpy as np

from coopsafe.grid_hj import Grid3, signed_distance_cylinder
from coopsafe.plotting import level_set_slice, render_svg, theta_slice, to_world
from coopsafe.simulator import Method, random_scenario, run_scenario

from conftest import K, R_C


def _ring_area(c):
    x, y = c[:, 0], c[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, 1)) - np.dot(y, np.roll(x, 1)))


def test_level_outside_range_is_empty(field):
    out = level_set_slice(field, 0.0, [field.values.min() - 1.0, 1e6])
    assert all(v == [] for v in out.values())


def test_zero_level_of_cylinder_is_circle():
    g = Grid3((41, 41, 8), (-10, -10, 0), (10, 10, 2 * np.pi))
    f = signed_distance_cylinder(g, R_C)
    (contour,) = level_set_slice(f, 1.3, [0.0])[0.0]
    assert np.allclose(contour[0], contour[-1])  # closed
    r = np.hypot(contour[:, 0], contour[:, 1])
    assert np.max(np.abs(r - R_C)) <= np.hypot(*g.spacing[:2])


def test_contours_nested(field):
    for th in (0.0, np.pi / 2, np.pi, 4.0):
        out = level_set_slice(field, th, [0.0, K])
        inner = max(out[0.0], key=_ring_area)
        outer = max(out[K], key=_ring_area)
        assert _ring_area(inner) < _ring_area(outer)
        # inner contour points lie in the K-sublevel region of the slice
        sl = theta_slice(field, th)
        lo, h = np.array(field.grid.min_corner[:2]), np.array(field.grid.spacing[:2])
        idx = np.rint((inner - lo) / h).astype(int)
        assert np.all(sl[idx[:, 0], idx[:, 1]] <= K + 0.5)


def test_theta_slice_at_node(field):
    k = 17
    th = field.grid.axes()[2][k]
    assert np.allclose(theta_slice(field, th), field.values[:, :, k])


def test_to_world_rotation():
    pts = np.array([[1.0, 0.0], [0.0, 2.0]])
    w = to_world(pts, (3.0, 4.0, np.pi / 2))
    assert np.allclose(w, [[3, 5], [1, 4]])


def test_render_svg(tmp_path, field):
    sc = random_scenario(3, 0)
    trace, _ = run_scenario(sc, field, Method.MIP, t_max=6.0)
    idx = render_svg(trace, sc, field, tmp_path / "s.svg")
    assert trace[idx].assignment.sum() == max(r.assignment.sum() for r in trace)
    assert "<svg" in (tmp_path / "s.svg").read_text()
