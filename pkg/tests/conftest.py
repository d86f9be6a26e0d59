import pytest
from hypothesis import HealthCheck, settings


settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion")
    config.addinivalue_line("markers", "slow: long-running test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, text = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        status = "PASS" if rep.passed else "FAIL"
        prev = _CRITERIA.get(num)
        if prev is None or prev[0] == "PASS":
            _CRITERIA[num] = (status, text)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, text = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {text}")
