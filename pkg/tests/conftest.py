import sys
from pathlib import Path

import pytest

from imagined_we.grid_env import micro_grid_trial

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def micro():
    """MicroGrid with target A (receiver-adjacent)."""
    return micro_grid_trial("A")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
