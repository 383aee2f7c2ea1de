"""Shared test fixtures for all tests."""
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from graphs import NeighborOracle, grow_ball  # noqa: E402
from groups import FreeAbelianGroup, FreeGroup  # noqa: E402
from scenario import FIXTURES_DIR, load_scenario  # noqa: E402


@pytest.fixture
def fixtures_dir():
    """Return the directory holding the shipped scenario, pocset and graph files."""
    return FIXTURES_DIR


@pytest.fixture
def f2():
    return FreeGroup(["a", "b"], "F2")


@pytest.fixture
def z2():
    return FreeAbelianGroup(["a", "b"], "Z2")


@pytest.fixture
def line_window():
    """Two rays of length 4 joined at 0, grown from 0."""
    oracle = NeighborOracle(neighbors=lambda n: [n - 1, n + 1])
    return grow_ball(oracle, 0, 4)


@pytest.fixture
def scenario():
    """Return a loader for shipped scenario fixtures by name."""
    return load_scenario
