import time

import pytest

_CRITERIA: dict[int, tuple[str, bool, str, float]] = {}


class _Criterion:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.t0 = time.perf_counter()

    def report(self, passed: bool, detail: str = "") -> bool:
        elapsed = time.perf_counter() - self.t0
        _CRITERIA[self.number] = (self.title, bool(passed), detail, elapsed)
        return bool(passed)


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    c = _Criterion(number, title)
    yield c
    if number not in _CRITERIA:
        _CRITERIA[number] = (title, False, "did not report", time.perf_counter() - c.t0)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        title, ok, detail, secs = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail} [{secs:.1f}s]")
