_results: dict[int, tuple[str, list[str]]] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    # A fixture failure during setup counts against the criterion too.
    if call.when != "call" and not (call.when == "setup" and call.excinfo is not None):
        return
    number, title = marker.args
    ok = call.excinfo is None
    _, outcomes = _results.setdefault(number, (title, []))
    outcomes.append("PASS" if ok else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        title, outcomes = _results[number]
        verdict = "PASS" if all(o == "PASS" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"{verdict} criterion {number}: {title}")
