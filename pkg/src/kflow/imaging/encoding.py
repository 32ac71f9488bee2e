"""Velocity encoding into magnetization phase, k-space noise models and
the zero-filled baseline reconstruction."""

from __future__ import annotations

import numpy as np

from kflow.grids import ComplexField, SamplingMask, ScalarField, same_grid
from kflow.imaging.fourier import dft3, idft3


def encode_magnetization(
    M: ScalarField, u: ScalarField, phi_back: ScalarField, venc: float
) -> ComplexField:
    """Magnetization M * exp(i*((pi/venc)*u + phi_back)) per voxel."""
    if venc <= 0:
        raise ValueError("venc must be positive")
    grid = same_grid(M, u, phi_back)
    phase = (np.pi / venc) * u.values + phi_back.values
    return ComplexField(grid, M.values * np.exp(1j * phase))


def phase_difference_velocity(
    m_enc: ComplexField, phi_back: ScalarField, venc: float
) -> ScalarField:
    """Decode velocity from the encoded phase by background subtraction.

    The phase difference is wrapped to [-pi, pi) so the output always lies
    in [-venc, venc); velocities beyond venc alias. Voxels with zero
    magnitude have no defined angle and decode to 0 (static tissue).
    """
    if venc <= 0:
        raise ValueError("venc must be positive")
    grid = same_grid(m_enc, phi_back)
    delta = np.angle(m_enc.values) - phi_back.values
    wrapped = np.mod(delta + np.pi, 2.0 * np.pi) - np.pi
    u = wrapped * (venc / np.pi)
    u[m_enc.values == 0] = 0.0
    return ScalarField(grid, u)


def simulate_kspace(
    m: ComplexField, mask: SamplingMask, sigma: float, seed: int
) -> ComplexField:
    """Masked k-space of a magnetization image with complex Gaussian noise.

    Noise with independent real/imaginary components of std `sigma` is
    drawn only at selected voxels (in x-fastest voxel order), so the
    result is reproducible per seed regardless of grid size bookkeeping.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    grid = same_grid(m, mask)
    kspace = dft3(m).values
    sel = mask.selected
    out = np.zeros_like(kspace)
    if sigma > 0:
        rng = np.random.default_rng(seed)
        flat_sel = sel.ravel(order="F")
        n_sel = int(flat_sel.sum())
        noise = rng.standard_normal((n_sel, 2)) * sigma
        eps = np.zeros(grid.voxel_count, dtype=np.complex128)
        eps[flat_sel] = noise[:, 0] + 1j * noise[:, 1]
        out = (kspace.ravel(order="F") + eps).reshape(grid.dims, order="F")
        out[~sel] = 0.0
    else:
        out[sel] = kspace[sel]
    return ComplexField(grid, out)


def snr_to_sigma(M: ScalarField, foreground: np.ndarray, snr: float) -> float:
    """Per-channel k-space noise std matching an image-space SNR.

    Image-space SNR is defined as mean foreground magnitude over the
    image-space noise std per real/imaginary channel; under the
    unnormalized forward DFT that corresponds to a k-space std larger by
    sqrt(N).
    """
    if snr <= 0:
        raise ValueError("snr must be positive")
    foreground = np.asarray(foreground, dtype=bool)
    if foreground.shape != M.grid.dims:
        raise ValueError("foreground shape does not match grid")
    if not foreground.any():
        raise ValueError("foreground is empty")
    mean_mag = float(M.values[foreground].mean())
    return mean_mag * np.sqrt(M.grid.voxel_count) / snr


def estimate_noise_std(
    Y0: ComplexField, M: ScalarField, phi_back: ScalarField, mask: SamplingMask
) -> float:
    """Noise std from a velocity-free measurement.

    Assumes the flow is at rest at the first time instant, so the residual
    Y0 - F(M * exp(i*phi_back)) * S is pure noise on the selected voxels.
    Real and imaginary channels are pooled into one sample std.
    """
    same_grid(Y0, M, phi_back, mask)
    if mask.selected_count < 2:
        raise ValueError("need at least 2 selected voxels")
    reference = dft3(encode_magnetization(M, ScalarField.full(M.grid, 0.0), phi_back, 1.0))
    resid = Y0.values[mask.selected] - reference.values[mask.selected]
    pooled = np.concatenate([resid.real, resid.imag])
    return float(np.std(pooled, ddof=1))


def estimate_velocity_noise_std(V0: ScalarField, foreground: np.ndarray) -> float:
    """Velocity noise std from a rest-state velocity image over foreground voxels."""
    foreground = np.asarray(foreground, dtype=bool)
    if foreground.sum() < 2:
        raise ValueError("need at least 2 foreground voxels")
    return float(np.std(V0.values[foreground], ddof=1))


def zero_filled_reconstruction(kspace: ComplexField, mask: SamplingMask) -> ComplexField:
    """Inverse DFT of the zero-filled k-space (the artifact-prone baseline).

    Plain idft3 of the masked data: with the DC voxel always acquired this
    reproduces constant images at their exact amplitude, and it equals
    idft3 for a full mask.
    """
    grid = same_grid(kspace, mask)
    vals = kspace.values
    if np.any(vals[~mask.selected] != 0):
        raise ValueError("k-space carries data outside the sampling mask")
    return idft3(ComplexField(grid, vals))
