import time

import pytest

# criterion name -> list of (case id, status, seconds)
_RESULTS: dict[str, list[tuple[str, str, float]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the terminal summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        case = item.callspec.id if hasattr(item, "callspec") else ""
        _RESULTS.setdefault(mark.args[0], []).append((case, status, rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    n_pass = 0
    for name, cases in _RESULTS.items():
        ok = all(s == "PASS" for _, s, _ in cases)
        n_pass += ok
        failed = [c or "-" for c, s, _ in cases if s != "PASS"]
        detail = f"  failing: {', '.join(failed)}" if failed else ""
        secs = sum(d for _, _, d in cases)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  ({secs:.1f}s){detail}")
    terminalreporter.write_line(f"{n_pass}/{len(_RESULTS)} criteria passed")


@pytest.fixture
def stopwatch():
    start = time.perf_counter()
    return lambda: time.perf_counter() - start
