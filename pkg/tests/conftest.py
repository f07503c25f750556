import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tsi.fields import make_field  # noqa: E402
from tsi.lattice import make_lattice  # noqa: E402

SPECS = Path(__file__).resolve().parents[1] / "specs"


@pytest.fixture(scope="session")
def oblique():
    return make_lattice((1.0, 0.0), (0.4, 1.1))


@pytest.fixture(scope="session")
def identity():
    return make_lattice((1.0, 0.0), (0.0, 1.0))


def flagship_fields(lat):
    b0 = 2 * math.pi / lat.delta_area
    B = make_field(lat, {(1, 0): 0.1 * b0, (-1, 0): 0.1 * b0, (0, 1): 0.1 * b0,
                         (0, -1): 0.1 * b0, (2, 0): 0.03 * b0, (-2, 0): 0.03 * b0},
                   normalize_flux=True)
    V = make_field(lat, {(1, 0): 0.5, (-1, 0): 0.5, (1, 1): 0.3, (-1, -1): 0.3})
    return B, V


@pytest.fixture(scope="session")
def flagship(oblique):
    return flagship_fields(oblique)


@pytest.fixture(scope="session")
def specs_dir():
    return SPECS


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
