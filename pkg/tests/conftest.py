import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ccsgsd.closed_test import plan
from ccsgsd.correlation import InformationTable
from ccsgsd.graph import MultiplicityGraph
from ccsgsd.spending import SpendingSpec

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

TIMINGS = (0.5, 0.75, 1.0)
PREVALENCE = 0.6
ALPHA = 0.025


def two_population_graph():
    return MultiplicityGraph([0.5, 0.5], [[0, 1], [1, 0]])


@pytest.fixture(scope="session")
def oncology_info():
    return InformationTable.planned([PREVALENCE], TIMINGS, 434)


@pytest.fixture(scope="session")
def oncology_tables(oncology_info):
    """Plans for algorithms 1 and 3 on the oncology configuration."""
    spec = SpendingSpec("ldof", ALPHA)
    g = two_population_graph()
    return {
        1: plan(oncology_info, g, spec, ALPHA, algorithm=1),
        3: plan(oncology_info, g, spec, ALPHA, algorithm=3),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
