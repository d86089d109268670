import hashlib

import numpy as np
import pytest

from coopsafe import Grid3, RelDynParams, signed_distance_cylinder, solve_brs
from coopsafe.persistence import load_brs, save_brs

R_C = 5.0
K = 1.5
PARAMS = RelDynParams(5.0, 1.0)
COARSE_GRID = Grid3((61, 61, 60), (-45.0, -45.0, 0.0), (45.0, 45.0, 2 * np.pi))


def _cached_solve(request, grid, name):
    """Solve once per grid and keep the result in pytest's cache directory."""
    key = hashlib.sha1(repr((grid, PARAMS, R_C)).encode()).hexdigest()[:12]
    path = request.config.cache.mkdir("coopsafe-brs") / f"{name}-{key}.bin"
    if path.exists():
        return load_brs(path)
    field = solve_brs(signed_distance_cylinder(grid, R_C), PARAMS, 1e-3, 20000)
    save_brs(field, path)
    return field


@pytest.fixture(scope="session")
def field(request):
    """Converged value function on the default grid."""
    return _cached_solve(request, Grid3.default(), "default")


@pytest.fixture(scope="session")
def coarse_field(request):
    """Converged value function on a coarse grid spanning +-45."""
    return _cached_solve(request, COARSE_GRID, "coarse")


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
