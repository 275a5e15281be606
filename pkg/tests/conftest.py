from __future__ import annotations

import pytest

from helpers import (
    DEEP_PARENTS,
    FAN_PARENTS,
    FIVE_EDGE_PARENTS,
    TRAP_PARENTS,
    TRAP_VARS,
    tree_from,
)


@pytest.fixture
def five_edge_tree():
    # tight forecasts keep the golden detection examples near-deterministic
    return tree_from(FIVE_EDGE_PARENTS, variances=1e-4)


@pytest.fixture
def deep_tree():
    return tree_from(DEEP_PARENTS)


@pytest.fixture
def trap_tree():
    return tree_from(TRAP_PARENTS, variances=TRAP_VARS)


@pytest.fixture
def fan_tree():
    return tree_from(FAN_PARENTS, variances=0.04)
