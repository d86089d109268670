"""Level-set slices of the value function and static SVG rendering of runs."""

from __future__ import annotations

import numpy as np
from skimage import measure

from .grid_hj import TWO_PI, ValueField

COLORS = ["tab:red", "tab:green", "tab:blue", "tab:orange", "tab:purple", "tab:brown",
          "tab:pink", "tab:olive", "tab:cyan", "tab:gray"]


def theta_slice(field: ValueField, theta: float) -> np.ndarray:
    """Planar slice at relative heading ``theta``, linear between the neighbouring layers."""
    g = field.grid
    h = g.spacing[2]
    u = np.mod(theta - g.min_corner[2], TWO_PI) / h
    k0 = int(np.floor(u)) % g.dims[2]
    k1 = (k0 + 1) % g.dims[2]
    f = u - np.floor(u)
    return (1 - f) * field.values[:, :, k0] + f * field.values[:, :, k1]


def level_set_slice(field: ValueField, theta_rel: float, levels) -> dict[float, list[np.ndarray]]:
    """Marching-squares contours of the slice, as ``(M, 2)`` arrays of ``(p_x, p_y)``.

    Levels outside the slice's value range give an empty list.
    """
    sl = theta_slice(field, theta_rel)
    lo = np.array(field.grid.min_corner[:2])
    h = np.array(field.grid.spacing[:2])
    out = {}
    for level in levels:
        if level < sl.min() or level > sl.max():
            out[level] = []
            continue
        out[level] = [lo + c * h for c in measure.find_contours(sl, level)]
    return out


def to_world(points: np.ndarray, pose) -> np.ndarray:
    """Map relative-frame points of the other vehicle to world coordinates around ``pose``."""
    x, y, th = pose[0], pose[1], pose[2]
    c, s = np.cos(th), np.sin(th)
    R = np.array([[c, -s], [s, c]])
    return points @ R.T + np.array([x, y])


def render_svg(trace, scenario, field: ValueField, path, record_index: int | None = None) -> int:
    """Draw trajectories, targets, danger zones and avoidance level sets.

    The snapshot is ``record_index`` or, by default, the first record with the
    most active avoidance assignments.  Returns the index used.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if record_index is None:
        counts = [int(r.assignment.sum()) for r in trace]
        record_index = int(np.argmax(counts))
    snap = trace[record_index]
    n = len(snap.states)
    path_xy = np.array([r.states[:, :2] for r in trace])

    fig, ax = plt.subplots(figsize=(6, 6))
    for i in range(n):
        col = COLORS[i % len(COLORS)]
        ax.plot(path_xy[:, i, 0], path_xy[:, i, 1], color=col, lw=1, alpha=0.6)
        tx, ty = scenario.targets[i]
        ax.add_patch(plt.Circle((tx, ty), scenario.goal_radius, color=col, fill=False, ls="--"))
        x, y, th, reached = snap.states[i]
        if not reached:
            ax.add_patch(plt.Circle((x, y), scenario.capture_radius, color=col, alpha=0.15))
            ax.arrow(x, y, np.cos(th), np.sin(th), color=col, head_width=0.5)
    for i, j in zip(*np.nonzero(snap.assignment)):
        xi, xj = snap.states[i], snap.states[j]
        theta_rel = np.mod(xj[2] - xi[2], TWO_PI)
        contours = level_set_slice(field, theta_rel, [0.0, scenario.K])
        for level, style in ((0.0, "-"), (scenario.K, ":")):
            for c in contours[level]:
                w = to_world(c, xi)
                ax.plot(w[:, 0], w[:, 1], color=COLORS[j % len(COLORS)], ls=style, lw=1)
    ax.set_aspect("equal")
    ax.set_title(f"t = {snap.time:.2f}")
    fig.savefig(path, format="svg")
    plt.close(fig)
    return record_index
