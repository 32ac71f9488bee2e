import numpy as np
import pytest

from kflow.container import read_field, write_field, write_mask_pgm
from kflow.grids import ComplexField, SamplingMask, ScalarField, VoxelGrid
from kflow.imaging import make_spiral_mask

from conftest import random_complex_field, random_scalar_field


@pytest.fixture
def grid():
    return VoxelGrid((5, 3, 2), spacing=(2.0, 2.0, 1.5), origin=(-4.0, 0.0, 1.0))


def test_scalar_round_trip_bit_exact(tmp_path, rng, grid):
    field = random_scalar_field(grid, rng)
    path = tmp_path / "s.kfe"
    write_field(path, field)
    back = read_field(path)
    assert isinstance(back, ScalarField)
    assert back.grid == grid
    assert np.array_equal(
        back.values.view(np.uint64), field.values.view(np.uint64)
    )  # bit exact, NaN-safe comparison


def test_complex_round_trip_bit_exact(tmp_path, rng, grid):
    field = random_complex_field(grid, rng)
    path = tmp_path / "c.kfe"
    write_field(path, field)
    back = read_field(path)
    assert isinstance(back, ComplexField)
    assert np.array_equal(back.values, field.values)
    assert back.values.dtype == np.complex128


def test_mask_round_trip_with_metadata(tmp_path):
    grid = VoxelGrid((16, 16, 2))
    mask = make_spiral_mask(grid, 4.0, turns=8)
    path = tmp_path / "m.kfe"
    write_field(path, mask)
    back = read_field(path)
    assert isinstance(back, SamplingMask)
    assert np.array_equal(back.selected, mask.selected)
    assert back.target_R == mask.target_R
    assert back.pattern == mask.pattern


def test_payload_is_x_fastest(tmp_path):
    grid = VoxelGrid((2, 2, 1))
    vals = np.array([[[1.0], [3.0]], [[2.0], [4.0]]])  # vals[x, y, 0]
    write_field(tmp_path / "f.kfe", ScalarField(grid, vals))
    raw = (tmp_path / "f.kfe").read_bytes()
    payload = np.frombuffer(raw[81:], dtype="<f8")
    assert list(payload) == [1.0, 2.0, 3.0, 4.0]  # x varies fastest


def test_bad_magic_rejected(tmp_path):
    p = tmp_path / "bad.kfe"
    p.write_bytes(b"NOPE" + b"\x00" * 100)
    with pytest.raises(ValueError):
        read_field(p)


def test_truncated_payload_rejected(tmp_path, rng, grid):
    p = tmp_path / "t.kfe"
    write_field(p, random_scalar_field(grid, rng))
    data = p.read_bytes()
    p.write_bytes(data[:-8])
    with pytest.raises(ValueError):
        read_field(p)


def test_pgm_render(tmp_path):
    grid = VoxelGrid((8, 6, 1))
    mask = SamplingMask.full(grid)
    out = tmp_path / "m.pgm"
    write_mask_pgm(out, mask)
    raw = out.read_bytes()
    assert raw.startswith(b"P5\n8 6\n255\n")
    assert set(raw.split(b"255\n", 1)[1]) == {255}
