import functools

import pytest

from deltashock.problem import example12, quartic_instance
from deltashock.uwave import UField
from deltashock.vtransport import VField


@pytest.fixture(scope="session")
def ex12():
    return example12()


@pytest.fixture(scope="session")
def quartic():
    return quartic_instance()


@pytest.fixture(scope="session")
def ex12_u(ex12):
    return UField(ex12)


@functools.lru_cache(maxsize=None)
def _vfield(eps, t_max):
    p = example12()
    return VField(p, eps, UField(p), t_max=t_max)


@pytest.fixture(scope="session")
def ex12_v():
    """Shared Example-12 v fields, keyed by ``(eps, t_max)``."""
    return _vfield


_ACCEPTANCE_LINES = {}


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(_ACCEPTANCE_LINES[n])
