import numpy as np
import pytest

from kflow.grids import SamplingMask, VoxelGrid
from kflow.imaging import compose_masks, make_gaussian_mask, make_spiral_mask

GRID64 = VoxelGrid((64, 64, 4))


class TestSpiral:
    def test_r1_degenerates_to_full(self):
        mask = make_spiral_mask(GRID64, 1.0)
        assert mask.selected.all()

    def test_r8_count_window(self):
        mask = make_spiral_mask(GRID64, 8.0)
        count = int(mask.inplane().sum())
        assert 461 <= count <= 563  # 4096/8 within 10%
        assert abs(mask.achieved_R - 8.0) <= 0.8

    def test_deterministic(self):
        a = make_spiral_mask(GRID64, 8.0)
        b = make_spiral_mask(GRID64, 8.0)
        assert np.array_equal(a.selected, b.selected)

    def test_dc_always_selected(self):
        for R in (8.0, 16.0, 32.0):
            assert make_spiral_mask(GRID64, R).inplane()[0, 0]

    def test_replicated_along_z(self):
        mask = make_spiral_mask(GRID64, 16.0)
        assert np.array_equal(mask.selected[:, :, 0], mask.selected[:, :, 3])

    def test_infeasible_R_rejected(self):
        with pytest.raises(ValueError):
            make_spiral_mask(VoxelGrid((8, 8, 1)), 100.0)


class TestGaussian:
    def test_r1_full_for_any_seed(self):
        for seed in (0, 1, 99):
            assert make_gaussian_mask(GRID64, 1.0, seed=seed).selected.all()

    def test_exact_cardinality_and_dc(self):
        mask = make_gaussian_mask(GRID64, 16.0, seed=12)
        assert int(mask.inplane().sum()) == 256
        assert mask.inplane()[0, 0]

    def test_deterministic_per_seed(self):
        a = make_gaussian_mask(GRID64, 8.0, seed=5)
        b = make_gaussian_mask(GRID64, 8.0, seed=5)
        c = make_gaussian_mask(GRID64, 8.0, seed=6)
        assert np.array_equal(a.selected, b.selected)
        assert not np.array_equal(a.selected, c.selected)

    def test_center_density_beats_uniform(self):
        kx = np.fft.fftfreq(64, 1 / 64)[:, None]
        ky = np.fft.fftfreq(64, 1 / 64)[None, :]
        radius = np.sqrt(kx**2 + ky**2)
        uniform_mean = radius.mean()
        means = []
        for seed in range(50):
            plane = make_gaussian_mask(GRID64, 16.0, sigma_frac=1 / 6, seed=seed).inplane()
            means.append(radius[plane].mean())
        assert np.mean(means) < uniform_mean

    def test_acceleration_window(self):
        for R in (8.0, 16.0, 32.0):
            mask = make_gaussian_mask(GRID64, R, seed=3)
            assert abs(mask.achieved_R - R) <= 0.1 * R


class TestCompose:
    def test_full_is_identity_element(self):
        overlay = make_gaussian_mask(GRID64, 16.0, seed=1)
        composed = compose_masks(SamplingMask.full(GRID64), overlay)
        assert np.array_equal(composed.selected, overlay.selected)
        base = make_spiral_mask(GRID64, 8.0)
        composed = compose_masks(base, SamplingMask.full(GRID64))
        assert np.array_equal(composed.selected, base.selected)

    def test_intersection_density(self):
        grid = VoxelGrid((32, 32, 2))
        base = make_spiral_mask(grid, 2.0, turns=14)
        overlay = make_gaussian_mask(grid, 16.0, seed=8)
        composed = compose_masks(base, overlay)
        assert composed.pattern == "Composed"
        assert composed.achieved_R >= 16.0
        assert composed.target_R == pytest.approx(composed.achieved_R)

    def test_empty_intersection_rejected(self):
        grid = VoxelGrid((8, 8, 1))
        a = np.zeros(grid.dims, bool)
        a[1, 0, 0] = True
        b = np.zeros(grid.dims, bool)
        b[0, 1, 0] = True
        with pytest.raises(ValueError):
            compose_masks(
                SamplingMask(grid, a, 64.0, "GaussianRandom"),
                SamplingMask(grid, b, 64.0, "GaussianRandom"),
            )

    def test_grid_mismatch_rejected(self):
        with pytest.raises(ValueError):
            compose_masks(SamplingMask.full(GRID64), SamplingMask.full(VoxelGrid((8, 8, 1))))
