import sys
from pathlib import Path

import pytest

from adme.deladas import parse_goal
from adme.model import from_ddd

ROOT = Path(__file__).resolve().parent
FIXTURES = ROOT / "fixtures"
RANDC = ROOT.parent / "src" / "adme" / "data" / "randc.dld"

sys.path.insert(0, str(ROOT))


@pytest.fixture(scope="session")
def randc_text():
    return RANDC.read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def randc(randc_text):
    return parse_goal(randc_text)


@pytest.fixture(scope="session")
def baseline():
    return from_ddd((FIXTURES / "baseline.xml").read_bytes())


def restrict(goal, n):
    return goal.with_hosts(goal.hosts[:n])


# -- acceptance summary: one line per criterion, printed after the run

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    label = item.get_closest_marker("criterion")
    if label is None:
        return
    name = label.args[0]
    if report.when == "call" or (report.when == "setup" and report.failed):
        detail = dict(item.user_properties).get("detail", "")
        _ACCEPTANCE[name] = ("PASS" if report.passed else "FAIL", detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): an acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (status, detail) in _ACCEPTANCE.items():
        terminalreporter.write_line(f"{status}  {name}" + (f"  ({detail})" if detail else ""))
