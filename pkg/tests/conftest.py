import pytest

from ranimport.dg import DgSpace
from ranimport.geometry import CellGeometry, build_disk_mesh

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion(request):
    """Print and keep one PASS/FAIL line per acceptance criterion."""
    def record(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


@pytest.fixture(scope="session")
def geometry():
    return CellGeometry(10.0, 4.0)


@pytest.fixture(scope="session")
def coarse_mesh(geometry):
    return build_disk_mesh(geometry, 2.0, 1)


@pytest.fixture(scope="session")
def coarse_space(coarse_mesh):
    return DgSpace(coarse_mesh)
