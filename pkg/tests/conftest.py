import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion."""
    def note(number, ok, detail):
        _VERDICTS[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_VERDICTS[number])
        return ok
    return note


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[number])
