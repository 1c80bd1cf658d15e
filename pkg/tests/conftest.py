from collections import defaultdict

_CRITERIA = defaultdict(list)
_TITLES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion this test belongs to")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    crit = dict(report.user_properties).get("criterion")
    if crit is not None:
        _CRITERIA[crit[0]].append(report.passed)
        _TITLES[crit[0]] = crit[1]


def pytest_runtest_setup(item):
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        item.user_properties.append(("criterion", tuple(mark.args)))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        outcomes = _CRITERIA[k]
        status = "PASS" if all(outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {k}: {status}  {_TITLES[k]}  ({sum(outcomes)}/{len(outcomes)} cases)")
