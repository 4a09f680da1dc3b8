import re

from hypothesis import HealthCheck, settings

settings.register_profile("opkernel", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("opkernel")

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)$")
_outcomes: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or report.failed:
        verdict = "PASS" if report.passed else "FAIL"
        if report.when == "call" or n not in _outcomes:
            _outcomes[n] = (m.group(2).replace("_", " "), verdict)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        name, verdict = _outcomes[n]
        terminalreporter.write_line(f"criterion {n} {name}: {verdict}")
