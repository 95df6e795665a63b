import pytest

_results: dict = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if call.when == "setup" and call.excinfo is not None and call.excinfo.errisinstance(pytest.skip.Exception):
        _results.setdefault(number, []).append((title, "SKIP", str(call.excinfo.value)))
    elif call.when == "call":
        if call.excinfo is None:
            outcome = "PASS"
        elif call.excinfo.errisinstance(pytest.skip.Exception):
            outcome = "SKIP"
        else:
            outcome = "FAIL"
        detail = "" if call.excinfo is None else str(call.excinfo.value).splitlines()[0][:160]
        _results.setdefault(number, []).append((title, outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    # One line per criterion: any failure fails it; it passes only if something ran and nothing failed.
    for number in sorted(_results):
        entries = _results[number]
        outcomes = {o for _, o, _ in entries}
        outcome = "FAIL" if "FAIL" in outcomes else "PASS" if "PASS" in outcomes else "SKIP"
        line = f"criterion {number}: {outcome:4}  {entries[0][0]}"
        details = sorted({d for _, o, d in entries if o == outcome and d})
        if outcome != "PASS" and details:
            line += f"  ({details[0]})"
        terminalreporter.write_line(line)
