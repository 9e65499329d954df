import math
import warnings

import pytest

from squintloc.beamforming import jad_trajectory, synthesize_ttd
from squintloc.config import FarFieldWarning, PolarPosition, SystemConfig

warnings.simplefilter("ignore", FarFieldWarning)


@pytest.fixture(scope="session")
def desk():
    return SystemConfig.desk()


@pytest.fixture(scope="session")
def full():
    return SystemConfig.full()


@pytest.fixture(scope="session")
def desk_scan(desk):
    reg = desk.region
    return synthesize_ttd(reg.start, reg.end, desk), jad_trajectory(reg.start, reg.end, desk)


@pytest.fixture(scope="session")
def full_scan(full):
    reg = full.region
    return synthesize_ttd(reg.start, reg.end, full), jad_trajectory(reg.start, reg.end, full)


def deg(theta, r):
    return PolarPosition(math.radians(theta), float(r))


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
