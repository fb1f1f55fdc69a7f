import json
from pathlib import Path

import numpy as np
import pytest

from parboruta.forest import Forest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def load_fixture_forest():
    def load(name):
        return Forest.from_dict(json.loads((FIXTURES / name).read_text()))
    return load


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
