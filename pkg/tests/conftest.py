from importlib import resources
from pathlib import Path

import pytest

from ppe_edge.core import ZoneConfig

DATA = Path(str(resources.files("ppe_edge.data")))

# filled by test_acceptance.py, printed once at the end of the session
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def zones() -> ZoneConfig:
    return ZoneConfig.load(DATA / "gate1_zones.json")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
