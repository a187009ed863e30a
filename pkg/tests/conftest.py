import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

CRITERIA = {
    1: "stationary-light drift law",
    2: "Beer-Lambert limit",
    3: "EIT window width and scaling",
    4: "DOP triple equivalence",
    5: "reference fiber regression",
    6: "birefringence fit recovery",
    7: "closed-loop count pipeline",
    8: "stationary-light optimum shift",
    9: "conservation and convergence",
    10: "determinism",
}

_outcomes: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")


def pytest_runtest_logreport(report):
    n = _outcomes.get("_pending", {}).get(report.nodeid)
    if n is None:
        return
    ok = report.passed or (report.when != "call" and not report.failed)
    if report.failed or report.when == "call":
        _outcomes.setdefault(n, []).append((report.nodeid, ok and not report.failed))


def pytest_collection_modifyitems(items):
    pending = _outcomes.setdefault("_pending", {})
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            pending[item.nodeid] = m.args[0]


def pytest_terminal_summary(terminalreporter):
    ran = sorted(k for k in _outcomes if k != "_pending")
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in ran:
        results = _outcomes[n]
        status = "PASS" if all(ok for _, ok in results) else "FAIL"
        failed = [nid.split("::")[-1] for nid, ok in results if not ok]
        extra = f" ({', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {n:2d} {status}: {CRITERIA[n]}{extra}")

