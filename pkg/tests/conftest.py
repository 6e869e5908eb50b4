import numpy as np
import pytest

from boundary_lab.boundary import build_heat_triple

# filled by test_acceptance; one line per criterion in the terminal summary
ACCEPTANCE_LINES: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def heat100():
    return build_heat_triple(100)


@pytest.fixture(scope="session")
def heat50():
    return build_heat_triple(50)


@pytest.fixture(scope="session")
def heat20():
    return build_heat_triple(20)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        ok, detail = ACCEPTANCE_LINES[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
