import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kflow.grids import ComplexField, VoxelGrid
from kflow.imaging import dft3, idft3

from conftest import random_complex_field


def naive_dft3(values: np.ndarray) -> np.ndarray:
    """Brute-force triple-sum DFT, the independent oracle for dft3."""
    nx, ny, nz = values.shape
    out = np.zeros_like(values, dtype=np.complex128)
    for k1 in range(nx):
        for k2 in range(ny):
            for k3 in range(nz):
                acc = 0.0 + 0.0j
                for n1 in range(nx):
                    for n2 in range(ny):
                        for n3 in range(nz):
                            phase = -2j * np.pi * (k1 * n1 / nx + k2 * n2 / ny + k3 * n3 / nz)
                            acc += values[n1, n2, n3] * np.exp(phase)
                out[k1, k2, k3] = acc
    return out


def test_constant_field_is_dc_only():
    grid = VoxelGrid((2, 2, 2))
    k = dft3(ComplexField(grid, np.ones((2, 2, 2), dtype=complex)))
    assert k.values[0, 0, 0] == pytest.approx(8.0)
    rest = k.values.copy()
    rest[0, 0, 0] = 0.0
    assert np.abs(rest).max() < 1e-14


def test_impulse_is_flat(grid444):
    vals = np.zeros(grid444.dims, dtype=complex)
    vals[0, 0, 0] = 1.0
    k = dft3(ComplexField(grid444, vals))
    assert np.allclose(k.values, 1.0, atol=1e-14)


def test_matches_naive_triple_sum(rng, grid444):
    field = random_complex_field(grid444, rng)
    expected = naive_dft3(field.values)
    got = dft3(field).values
    rel = np.linalg.norm(got - expected) / np.linalg.norm(expected)
    assert rel < 1e-10


def test_round_trip(rng, grid444):
    field = random_complex_field(grid444, rng)
    back = idft3(dft3(field)).values
    assert np.abs(back - field.values).max() < 1e-12


def test_all_ones_kspace_gives_impulse(grid444):
    img = idft3(ComplexField(grid444, np.ones(grid444.dims, dtype=complex)))
    expected = np.zeros(grid444.dims, dtype=complex)
    expected[0, 0, 0] = 1.0
    assert np.allclose(img.values, expected, atol=1e-14)


def test_zero_field_round_trips_to_zero(grid444):
    zero = ComplexField(grid444, np.zeros(grid444.dims, dtype=complex))
    assert np.abs(idft3(dft3(zero)).values).max() == 0.0


@settings(max_examples=20, deadline=None)
@given(
    dims=st.tuples(*(st.integers(min_value=1, max_value=16) for _ in range(3))),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_round_trip_and_parseval_property(dims, seed):
    rng = np.random.default_rng(seed)
    grid = VoxelGrid(dims)
    field = random_complex_field(grid, rng)
    k = dft3(field)
    back = idft3(k)
    scale = max(np.abs(field.values).max(), 1.0)
    assert np.abs(back.values - field.values).max() / scale < 1e-12
    lhs = np.sum(np.abs(field.values) ** 2)
    rhs = np.sum(np.abs(k.values) ** 2) / grid.voxel_count
    assert lhs == pytest.approx(rhs, rel=1e-10)
