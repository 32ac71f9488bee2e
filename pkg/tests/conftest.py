import numpy as np
import pytest

from kflow.grids import ComplexField, ScalarField, VoxelGrid


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def grid444():
    return VoxelGrid((4, 4, 4))


def random_complex_field(grid: VoxelGrid, rng) -> ComplexField:
    shape = grid.dims
    return ComplexField(grid, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def random_scalar_field(grid: VoxelGrid, rng, scale=1.0) -> ScalarField:
    return ScalarField(grid, scale * rng.standard_normal(grid.dims))
