"""Collects acceptance-criterion outcomes and prints one verdict line each."""

from collections import OrderedDict

import pytest

_RESULTS = OrderedDict()


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when not in ("setup", "call"):
        return
    if call.when == "setup" and call.excinfo is None:
        return
    cid, title = marker.args[:2]
    tol = marker.kwargs.get("tolerance", "")
    if call.excinfo is None:
        outcome = "PASS"
    elif call.excinfo.errisinstance(pytest.skip.Exception):
        outcome = "SKIP"
    else:
        outcome = "FAIL"
    entry = _RESULTS.setdefault(cid, {"title": title, "tolerance": tol, "outcomes": []})
    entry["outcomes"].append(outcome)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid, entry in _RESULTS.items():
        outs = entry["outcomes"]
        verdict = "FAIL" if "FAIL" in outs else ("SKIP" if "SKIP" in outs else "PASS")
        tol = f" [{entry['tolerance']}]" if entry["tolerance"] else ""
        tr.write_line(f"{verdict}  {cid:<4} {entry['title']}{tol}")
