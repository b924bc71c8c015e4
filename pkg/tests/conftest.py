import pytest

# criterion number -> short label, in report order
CRITERIA = {
    1: "M/M/1 reduction of the SCQ delay",
    2: "mixture P-K delay vs Monte Carlo",
    3: "PTQ chain correctness vs Monte Carlo",
    4: "single-slot Bernoulli chain closed forms",
    5: "per-BS allocation optimality",
    6: "small-instance near-optimality",
    7: "constraint audit of proposed runs",
    8: "throughput trends, wins and CDF",
    9: "monotonicity and threshold bracketing",
    10: "byte-identical CSV output",
}

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        _outcomes.setdefault(n, []).append(not failed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, label in CRITERIA.items():
        if n not in _outcomes:
            continue
        status = "PASS" if all(_outcomes[n]) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {label}")
