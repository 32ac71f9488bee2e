import numpy as np
import pytest

from kflow.grids import ComplexField, SamplingMask, ScalarField, VoxelGrid
from kflow.imaging import (
    dft3,
    encode_magnetization,
    estimate_noise_std,
    idft3,
    make_gaussian_mask,
    phase_difference_velocity,
    simulate_kspace,
    snr_to_sigma,
    zero_filled_reconstruction,
)

from conftest import random_scalar_field


def const(grid, v):
    return ScalarField.full(grid, v)


class TestEncode:
    def test_background_phase_only(self, grid444):
        m = encode_magnetization(const(grid444, 1.0), const(grid444, 0.0), const(grid444, 7.5e-2), 100.0)
        assert np.allclose(m.values, np.exp(0.075j))

    def test_full_scale_velocity_hits_pi(self, grid444):
        venc = 120.0
        m = encode_magnetization(const(grid444, 1.0), const(grid444, venc), const(grid444, 0.0), venc)
        assert np.allclose(np.angle(m.values), np.pi)

    def test_magnitude_preserved_exactly(self, rng, grid444):
        M = ScalarField(grid444, rng.uniform(0.1, 2.0, grid444.dims))
        u = random_scalar_field(grid444, rng, scale=40.0)
        m = encode_magnetization(M, u, const(grid444, 0.3), 150.0)
        assert np.abs(np.abs(m.values) - M.values).max() < 1e-14

    def test_grid_mismatch_rejected(self, grid444):
        other = VoxelGrid((2, 2, 2))
        with pytest.raises(ValueError):
            encode_magnetization(const(grid444, 1.0), const(other, 0.0), const(grid444, 0.0), 1.0)


class TestPhaseDifference:
    def test_formula(self, grid444):
        phi = const(grid444, 0.2)
        m = ComplexField(grid444, np.exp(1j * (np.pi / 2 + 0.2)) * np.ones(grid444.dims))
        u = phase_difference_velocity(m, phi, 150.0)
        assert np.allclose(u.values, 75.0)

    def test_encode_decode_round_trip(self, rng, grid444):
        venc = 150.0
        u = ScalarField(grid444, rng.uniform(-0.99, 0.99, grid444.dims) * venc)
        phi = random_scalar_field(grid444, rng, scale=0.4)
        m = encode_magnetization(const(grid444, 1.0), u, phi, venc)
        back = phase_difference_velocity(m, phi, venc)
        assert np.abs(back.values - u.values).max() < 1e-12

    def test_aliasing_wrap(self, grid444):
        venc = 100.0
        u = const(grid444, 1.5 * venc)
        m = encode_magnetization(const(grid444, 1.0), u, const(grid444, 0.0), venc)
        back = phase_difference_velocity(m, const(grid444, 0.0), venc)
        assert np.allclose(back.values, -0.5 * venc, atol=1e-10)

    def test_zero_velocity_and_range(self, rng, grid444):
        venc = 80.0
        phi = random_scalar_field(rng=rng, grid=grid444, scale=0.5)
        m = encode_magnetization(const(grid444, 1.0), const(grid444, 0.0), phi, venc)
        assert np.abs(phase_difference_velocity(m, phi, venc).values).max() < 1e-12
        u = ScalarField(grid444, rng.uniform(-5, 5, grid444.dims) * venc)
        enc = encode_magnetization(const(grid444, 1.0), u, phi, venc)
        dec = phase_difference_velocity(enc, phi, venc).values
        assert dec.min() >= -venc and dec.max() < venc

    def test_zero_magnitude_decodes_to_zero(self, grid444):
        vals = np.ones(grid444.dims, dtype=complex)
        vals[0, 0, 0] = 0.0
        u = phase_difference_velocity(ComplexField(grid444, vals), const(grid444, 0.0), 50.0)
        assert u.values[0, 0, 0] == 0.0


class TestSimulateKSpace:
    def test_noiseless_full_mask(self, rng, grid444):
        m = encode_magnetization(const(grid444, 1.0), random_scalar_field(grid444, rng), const(grid444, 0.0), 10.0)
        out = simulate_kspace(m, SamplingMask.full(grid444), 0.0, seed=1)
        assert np.array_equal(out.values, dft3(m).values)

    def test_noiseless_masking(self, rng):
        grid = VoxelGrid((8, 8, 2))
        m = ComplexField(grid, rng.standard_normal(grid.dims) + 0j)
        mask = make_gaussian_mask(grid, 2.0, seed=5)
        out = simulate_kspace(m, mask, 0.0, seed=1)
        assert np.all(out.values[~mask.selected] == 0)
        assert np.array_equal(out.values[mask.selected], dft3(m).values[mask.selected])

    def test_deterministic_per_seed(self, rng, grid444):
        m = ComplexField(grid444, rng.standard_normal(grid444.dims) + 0j)
        mask = SamplingMask.full(grid444)
        a = simulate_kspace(m, mask, 2.0, seed=9)
        b = simulate_kspace(m, mask, 2.0, seed=9)
        c = simulate_kspace(m, mask, 2.0, seed=10)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_noise_std_statistics(self):
        grid = VoxelGrid((25, 20, 20))  # 10^4 voxels
        m = ComplexField(grid, np.zeros(grid.dims, dtype=complex))
        sigma = 15.526
        out = simulate_kspace(m, SamplingMask.full(grid), sigma, seed=77)
        sample = np.std(out.values.real, ddof=1)
        assert sample == pytest.approx(sigma, rel=0.03)


class TestSnrToSigma:
    def test_formula_instantiation(self):
        grid = VoxelGrid((4, 2, 2))  # N = 16
        sigma = snr_to_sigma(ScalarField.full(grid, 1.0), np.ones(grid.dims, bool), 1.0)
        assert sigma == pytest.approx(4.0)

    def test_homogeneity_in_snr(self, grid444):
        fg = np.ones(grid444.dims, bool)
        M = ScalarField.full(grid444, 1.3)
        assert snr_to_sigma(M, fg, 30.0) == pytest.approx(0.5 * snr_to_sigma(M, fg, 15.0))

    def test_monte_carlo_image_snr_round_trip(self):
        grid = VoxelGrid((16, 16, 8))
        fg = np.zeros(grid.dims, bool)
        fg[4:12, 4:12, :] = True
        M = ScalarField(grid, np.where(fg, 1.0, 0.5))
        snr = 15.0
        sigma = snr_to_sigma(M, fg, snr)
        m = encode_magnetization(M, ScalarField.full(grid, 0.0), ScalarField.full(grid, 0.0), 1.0)
        recon = idft3(simulate_kspace(m, SamplingMask.full(grid), sigma, seed=3))
        noise = recon.values - m.values
        measured = M.values[fg].mean() / np.std(noise.real[fg], ddof=1)
        assert measured == pytest.approx(snr, rel=0.10)


class TestZeroFilled:
    def test_full_mask_is_idft3(self, rng, grid444):
        m = ComplexField(grid444, rng.standard_normal(grid444.dims) + 0j)
        y = simulate_kspace(m, SamplingMask.full(grid444), 0.0, seed=0)
        assert np.array_equal(
            zero_filled_reconstruction(y, SamplingMask.full(grid444)).values, idft3(y).values
        )

    def test_dc_only_reproduces_constant(self, grid444):
        c = 2.5
        selected = np.zeros(grid444.dims, bool)
        selected[0, 0, 0] = True
        mask = SamplingMask(grid444, selected, target_R=float(grid444.voxel_count), pattern="GaussianRandom")
        y = simulate_kspace(ComplexField(grid444, c * np.ones(grid444.dims)), mask, 0.0, seed=0)
        recon = zero_filled_reconstruction(y, mask)
        assert np.allclose(recon.values, c)

    def test_data_outside_mask_rejected(self, rng, grid444):
        m = ComplexField(grid444, rng.standard_normal(grid444.dims) + 0j)
        selected = np.zeros(grid444.dims, bool)
        selected[0, 0, 0] = True
        mask = SamplingMask(grid444, selected, target_R=64.0, pattern="GaussianRandom")
        with pytest.raises(ValueError):
            zero_filled_reconstruction(dft3(m), mask)

    def test_undersampling_degrades_reconstruction(self, rng):
        grid = VoxelGrid((16, 16, 4))
        lumen = np.zeros(grid.dims, bool)
        lumen[5:11, 5:11, 1:3] = True
        u = ScalarField(grid, np.where(lumen, 40.0, 0.0))
        M = ScalarField(grid, np.where(lumen, 1.0, 0.5))
        phi = ScalarField.full(grid, 7.5e-2)
        m = encode_magnetization(M, u, phi, 100.0)
        full = SamplingMask.full(grid)
        r8 = make_gaussian_mask(grid, 8.0, seed=2)
        rec1 = zero_filled_reconstruction(simulate_kspace(m, full, 0.0, 0), full)
        rec8 = zero_filled_reconstruction(simulate_kspace(m, r8, 0.0, 0), r8)
        e1 = np.linalg.norm(rec1.values - m.values) / np.linalg.norm(m.values)
        e8 = np.linalg.norm(rec8.values - m.values) / np.linalg.norm(m.values)
        assert e8 > e1


class TestEstimateNoiseStd:
    def setup_method(self):
        self.grid = VoxelGrid((16, 16, 4))
        self.M = ScalarField.full(self.grid, 1.0)
        self.phi = ScalarField.full(self.grid, 7.5e-2)
        self.m0 = encode_magnetization(self.M, ScalarField.full(self.grid, 0.0), self.phi, 1.0)

    def test_noiseless_gives_zero(self):
        mask = SamplingMask.full(self.grid)
        y0 = simulate_kspace(self.m0, mask, 0.0, seed=0)
        assert estimate_noise_std(y0, self.M, self.phi, mask) < 1e-12

    def test_recovers_injected_sigma(self):
        mask = SamplingMask.full(self.grid)
        sigma = 4.2667
        y0 = simulate_kspace(self.m0, mask, sigma, seed=11)
        est = estimate_noise_std(y0, self.M, self.phi, mask)
        assert est == pytest.approx(sigma, rel=0.03)

    def test_invariant_under_velocity_free_signal(self):
        # adding any magnetization consistent with M, phi_back (zero velocity)
        # leaves the residual, and hence the estimate, unchanged
        mask = SamplingMask.full(self.grid)
        sigma = 2.0
        y0 = simulate_kspace(self.m0, mask, sigma, seed=4)
        est0 = estimate_noise_std(y0, self.M, self.phi, mask)
        bigger_M = ScalarField(self.grid, 3.0 * self.M.values)
        m_big = encode_magnetization(bigger_M, ScalarField.full(self.grid, 0.0), self.phi, 1.0)
        y_big = ComplexField(self.grid, y0.values + dft3(m_big).values - dft3(self.m0).values)
        est1 = estimate_noise_std(y_big, bigger_M, self.phi, mask)
        assert est1 == pytest.approx(est0, rel=1e-12)

    def test_requires_two_selected_voxels(self):
        selected = np.zeros(self.grid.dims, bool)
        selected[0, 0, 0] = True
        mask = SamplingMask(self.grid, selected, target_R=1024.0, pattern="GaussianRandom")
        y0 = simulate_kspace(self.m0, mask, 1.0, seed=0)
        with pytest.raises(ValueError):
            estimate_noise_std(y0, self.M, self.phi, mask)
