import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "legquant",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("legquant")

_ACCEPTANCE: dict[int, list[tuple[str, str]]] = {}
_CRITERIA = {
    1: "on-curve growth of the knot state at (1, 0)",
    2: "rapid decay off the circle orbit of the knot",
    3: "equivariant magnitudes for the weight (1, -1) circle action",
    4: "leading-term assembly reproduces the equivariant asymptote",
    5: "Gaussian profile of displaced probes",
    6: "transverse pairing of two knots",
    7: "randomized property suites",
}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _ACCEPTANCE.setdefault(mark.args[0], []).append((item.name, rep.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        results = _ACCEPTANCE.get(n)
        if not results:
            tr.write_line(f"criterion {n}: NOT RUN  ({_CRITERIA[n]})")
            continue
        failed = [name for name, out in results if out != "passed"]
        status = "PASS" if not failed else "FAIL"
        extra = f"  failing: {', '.join(failed)}" if failed else ""
        tr.write_line(f"criterion {n}: {status}  ({_CRITERIA[n]}; {len(results)} test{'s' if len(results) != 1 else ''}){extra}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
