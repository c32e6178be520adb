"""Shared fixtures; the expensive desk-scale eigensolves run once per session."""

from __future__ import annotations

import pytest

from dil import (GridSpec, IndexParams, ModelSpec, build_operator_set,
                 build_susy_quartet, witten_index)

DESK_L = 5.0
DESK_N = 96


@pytest.fixture(scope="session")
def desk_grid() -> GridSpec:
    return GridSpec(DESK_L, DESK_N)


@pytest.fixture(scope="session")
def desk_set(desk_grid):
    return build_operator_set(ModelSpec(), desk_grid)


@pytest.fixture(scope="session")
def desk_index(desk_set, desk_grid):
    """Unperturbed index report with enough pairs for the pairing window."""
    return witten_index(desk_set, desk_grid, IndexParams(k=12))


@pytest.fixture(scope="session")
def desk_quartet(desk_set):
    return build_susy_quartet(desk_set.D_mat)


@pytest.fixture(scope="session")
def perturbed_index(desk_grid):
    """Index report at mass defect c = 0.19 (alpha should be 0.9)."""
    spec = ModelSpec(epsilon="0.19", f1_value=1)
    op_set = build_operator_set(spec, desk_grid)
    return witten_index(op_set, desk_grid, IndexParams(k=6))
