import re
from collections import OrderedDict

_CRITERION = re.compile(r"test_acceptance\.py::test_c(\d+)_")
NAMES = {
    1: "concentration numbers",
    2: "sensitivity exactness",
    3: "privacy-profile crossing",
    4: "advanced joint convexity",
    5: "Bretagnolle-Huber inequality",
    6: "hockey-stick trace-norm identity",
    7: "DP-bound soundness",
    8: "local-measurement soundness",
    9: "Laplace post-processing soundness",
    10: "multi-copy coverage",
    11: "robustness experiment",
    12: "CLI determinism",
}
_results: "OrderedDict[int, dict]" = OrderedDict()


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    num = int(m.group(1))
    entry = _results.setdefault(num, {"name": NAMES.get(num, ""), "ok": True})
    if report.failed:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_results):
        entry = _results[num]
        status = "PASS" if entry["ok"] else "FAIL"
        terminalreporter.write_line(f"{status} criterion {num:2d}: {entry['name']}")
