import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")

_ACCEPTANCE = []


@pytest.fixture
def accept():
    """Record one acceptance line and fail the test when it does not hold."""

    def record(criterion: str, ok: bool, detail: str):
        _ACCEPTANCE.append((criterion, bool(ok), detail))
        assert ok, f"criterion {criterion}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {crit}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
