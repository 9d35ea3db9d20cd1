import numpy as np
import pytest

from realspace_qc.molgrid import Molecule
from realspace_qc.voronoi import BoundingBox, build_diagram


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def hydrogen():
    return Molecule([1.0], [[0.0, 0.0, 0.0]])


@pytest.fixture
def helium():
    return Molecule([2.0], [[0.0, 0.0, 0.0]])


def lattice_diagram(n=5, h=1.0):
    """``n^3`` cubic lattice with spacing ``h`` in the tight box (cells are cubes)."""
    ax = h * np.arange(n, dtype=float)
    pts = np.array(np.meshgrid(ax, ax, ax, indexing="ij")).reshape(3, -1).T
    box = BoundingBox([-0.5 * h] * 3, [(n - 0.5) * h] * 3)
    return build_diagram(pts, box)


def random_diagram(n, seed=0, half=1.5, pad=0.5):
    pts = np.random.default_rng(seed).uniform(-half, half, (n, 3))
    return build_diagram(pts, BoundingBox([-half - pad] * 3, [half + pad] * 3))


@pytest.fixture
def small_diagram():
    return random_diagram(8, seed=3)


# lines recorded by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
