"""Print one PASS/FAIL line per acceptance criterion at the end of the run."""

_outcomes: dict[int, tuple[str, str]] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is not None and marker.args:
            item.user_properties.append(("criterion", marker.args))


def pytest_runtest_logreport(report):
    criterion = dict(report.user_properties).get("criterion")
    if criterion is None:
        return
    number, title = criterion
    status = _outcomes.get(number, ("PASS", title))[0]
    if report.failed or (report.when == "setup" and report.skipped):
        status = "FAIL"
    _outcomes[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        status, title = _outcomes[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
