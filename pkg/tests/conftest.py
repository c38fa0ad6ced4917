import pytest

from softhand_wrist.config import load_config
from softhand_wrist.tasks import run_task

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def shipped_config():
    return load_config()


@pytest.fixture(scope="session")
def rotation_reports(shipped_config):
    return run_task("rotation", True, shipped_config), run_task("rotation", False, shipped_config)


@pytest.fixture(scope="session")
def stacking_reports(shipped_config):
    return run_task("stacking", True, shipped_config), run_task("stacking", False, shipped_config)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
