import numpy as np
import pytest

from adaptive_labels import _pykernels

try:
    from adaptive_labels import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = [pytest.param(_pykernels, id="python")]
BACKENDS.append(pytest.param(_ckernels, id="cython",
                             marks=pytest.mark.skipif(_ckernels is None, reason="extension not built")))

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_tree_edges(rng, n_nodes):
    """Random rooted tree on nodes '0'..'n-1' with node 0 as root."""
    return [(str(int(rng.integers(0, i))), str(i)) for i in range(1, n_nodes)]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or report.outcome != "passed":
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        notes = "; ".join(f"{k}={v}" for k, v in report.user_properties)
        _criteria.setdefault(marker.args, []).append((item.name, status, notes))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), results in sorted(_criteria.items()):
        statuses = {s for _, s, _ in results}
        overall = "FAIL" if "FAIL" in statuses else "PASS" if "PASS" in statuses else "SKIP"
        detail = ", ".join(f"{name}={s}" + (f" [{notes}]" if notes else "") for name, s, notes in results)
        terminalreporter.write_line(f"criterion {number}: {overall}  {title}  ({detail})")
