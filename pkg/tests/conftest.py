import pytest

# criterion number -> [title, passed, details]
_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, [title, True, []])
    entry[1] = entry[1] and rep.passed and not hasattr(rep, "wasxfail")
    if rep.when == "call":
        entry[2].extend(v for k, v in item.user_properties if k == "detail")
        if hasattr(rep, "wasxfail"):
            entry[2].append(f"expected failure: {rep.wasxfail}")
        elif rep.failed:
            entry[2].append(f"{item.name} failed")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, details = _CRITERIA[number]
        line = f"C{number:<2} {'PASS' if ok else 'FAIL'}  {title}"
        if details:
            line += "  [" + "; ".join(details) + "]"
        terminalreporter.write_line(line)
