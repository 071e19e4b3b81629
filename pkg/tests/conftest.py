import numpy as np
import pytest
from hypothesis import settings

from wasse.case import load_case
from wasse.grid import default_partition

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def case14():
    return load_case("ieee14")


@pytest.fixture(scope="session")
def case39():
    return load_case("ieee39")


@pytest.fixture(scope="session")
def grid14(case14):
    return default_partition("ieee14", case14)


@pytest.fixture(scope="session")
def grid39(case39):
    return default_partition("ieee39", case39)


def random_spd(rng, n, scale=1.0):
    a = rng.normal(size=(n, n))
    return scale * (a @ a.T / n + 0.1 * np.eye(n))


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line; lines are repeated in the terminal summary."""

    def record(criterion: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
