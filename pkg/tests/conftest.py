"""Shared pytest hooks.

Tests marked ``@pytest.mark.acceptance("A<k>", "title")`` are grouped by
criterion; a criterion passes only if every test carrying its id passes.
One PASS/FAIL line per criterion is printed at the end of the run.
"""

from collections import OrderedDict

import pytest

_RESULTS = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(id, title): acceptance criterion the test belongs to")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            cid, title = mark.args
            _RESULTS.setdefault(cid, {"title": title, "tests": {}})["tests"][item.nodeid] = None


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_logreport(report):
    for entry in _RESULTS.values():
        if report.nodeid in entry["tests"]:
            if report.when == "call" or report.outcome != "passed":
                if entry["tests"][report.nodeid] in (None, "passed"):
                    entry["tests"][report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_RESULTS, key=lambda c: int(c[1:])):
        entry = _RESULTS[cid]
        outcomes = entry["tests"]
        if any(o is None for o in outcomes.values()):
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes.values()):
            status = "PASS"
        else:
            status = "FAIL"
        tr.write_line(f"{status:7s} {cid}  {entry['title']}")
        for nodeid, outcome in outcomes.items():
            if outcome not in ("passed", None):
                tr.write_line(f"          {outcome}: {nodeid.split('::', 1)[1]}")
