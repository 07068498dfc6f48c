import pytest

from hapticgan.synth import generate_store

_CRITERIA: dict[int, dict] = {}


@pytest.fixture(scope="session")
def small_store():
    """12 objects x 10 interactions of default synthetic data."""
    return generate_store(2, 10, seed=3)


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    number, title = crit
    entry = _CRITERIA.setdefault(number, {"title": title, "outcomes": []})
    if report.when == "call" or report.outcome != "passed":
        entry["outcomes"].append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        rep.criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        outs = entry["outcomes"]
        if any(o == "failed" for o in outs):
            status = "FAIL"
        elif outs and all(o == "skipped" for o in outs):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['title']}")
