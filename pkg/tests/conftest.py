import math

import numpy as np
import pytest

from neumann_green import geometry as geo

RANDOM_SEED = 7


@pytest.fixture(scope="session")
def unit_disk():
    return geo.disk()


@pytest.fixture(scope="session")
def disk_pan(unit_disk):
    return geo.panelize(unit_disk, 32, 16)


@pytest.fixture(scope="session")
def ellipse_pan():
    return geo.panelize(geo.ellipse(2.0, 0.5), 64, 16)


@pytest.fixture(scope="session")
def random_curve():
    return geo.fourier_random(RANDOM_SEED)


@pytest.fixture(scope="session")
def random_pan(random_curve):
    return geo.panelize(random_curve, 64, 16)


def random_points_in(curve, n, seed, margin=0.05):
    from neumann_green import capture

    return capture.random_interior_points(curve, n, np.random.default_rng(seed), margin=margin)


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


PI = math.pi


# Acceptance tests append (label, passed, detail) here; the lines are echoed at the
# end of the run so they appear in plain `pytest -v` output.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
