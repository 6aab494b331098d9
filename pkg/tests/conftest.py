import sys
from pathlib import Path

import pytest

from aalsim.sim import validate_config

DATA = Path(__file__).parent / "data"


def scenario(**overrides):
    base = {"schema_version": 1, "direction": "uplink", "slot_duration_us": 500.0,
            "tb_size_bytes": 64, "num_slots": 3}
    base.update(overrides)
    return validate_config(base)


@pytest.fixture
def make_scenario():
    return scenario


@pytest.fixture
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance") or sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
