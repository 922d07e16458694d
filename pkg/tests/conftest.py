"""Shared maps, inducing sets and cell tables (built once per session)."""

from __future__ import annotations

import pytest

from src.density import induced_density
from src.induced import build_cells, build_inducing_set
from src.maps import build_clm_map, build_thaler_map


@pytest.fixture(scope="session")
def symmetric_map():
    return build_thaler_map(0.5, [0.5])


@pytest.fixture(scope="session")
def asymmetric_map():
    return build_thaler_map(0.5, [0.4])


@pytest.fixture(scope="session")
def three_ray_map():
    return build_thaler_map(0.5, [1.0 / 3.0, 2.0 / 3.0])


@pytest.fixture(scope="session")
def clm_map():
    return build_clm_map(2.0)


@pytest.fixture(scope="session")
def symmetric_inducing(symmetric_map):
    return build_inducing_set(symmetric_map)


@pytest.fixture(scope="session")
def symmetric_cells(symmetric_map, symmetric_inducing):
    return build_cells(symmetric_map, symmetric_inducing, 10_000)


@pytest.fixture(scope="session")
def symmetric_density(symmetric_map, symmetric_cells):
    return induced_density(symmetric_map, symmetric_cells, grid_size=512)


@pytest.fixture(scope="session")
def asymmetric_cells(asymmetric_map):
    return build_cells(asymmetric_map, build_inducing_set(asymmetric_map), 10_000)


@pytest.fixture(scope="session")
def asymmetric_density(asymmetric_map, asymmetric_cells):
    return induced_density(asymmetric_map, asymmetric_cells, grid_size=512)
