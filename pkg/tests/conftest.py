from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from mems_limit.beam import DeflectionProfile
from mems_limit.grids import IntervalGrid

settings.register_profile(
    "repo", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


def bump(c):
    return lambda x: -c * (1 - x**2) ** 2


@pytest.fixture(scope="session")
def grid64():
    return IntervalGrid(64)


@pytest.fixture(scope="session")
def grid128():
    return IntervalGrid(128)


@pytest.fixture(scope="session")
def bump03_128(grid128):
    return DeflectionProfile.from_function(bump(0.3), grid128)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("#")[1].split()[0])):
            terminalreporter.write_line(line)
