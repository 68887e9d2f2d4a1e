import sys

import pytest
from hypothesis import HealthCheck, settings

from gradpert.kernel import KernelParams

settings.register_profile("kp", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("kp")

A0 = KernelParams(1.5)
A1 = KernelParams(1.5, 1.2, 1.0)


@pytest.fixture(scope="session")
def pure():
    return A0


@pytest.fixture(scope="session")
def mixed():
    return A1


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
