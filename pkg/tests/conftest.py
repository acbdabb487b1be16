import pytest

from mbsalloc.admission import new_cell
from mbsalloc.model import PROPOSED, fixed_mbs, reference_config


@pytest.fixture
def reference():
    return reference_config(PROPOSED)


@pytest.fixture
def empty_cell(reference):
    return new_cell(reference)


@pytest.fixture(params=["proposed", "fixed:6000", "fixed:14000"])
def any_scheme_config(request):
    if request.param == "proposed":
        return reference_config(PROPOSED)
    return reference_config(fixed_mbs(int(request.param.split(":")[1])))


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when not in ("setup", "call"):
        return
    number, title = marker.args
    failed = call.excinfo is not None
    if call.when == "call" or failed:
        _CRITERIA[number] = (title, "FAIL" if failed else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, verdict = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}")
