"""PC-MRI acquisition simulation and baseline reconstruction."""

from kflow.imaging.encoding import (
    encode_magnetization,
    estimate_noise_std,
    estimate_velocity_noise_std,
    phase_difference_velocity,
    simulate_kspace,
    snr_to_sigma,
    zero_filled_reconstruction,
)
from kflow.imaging.fourier import dft3, idft3
from kflow.imaging.masks import compose_masks, make_gaussian_mask, make_spiral_mask
from kflow.imaging.voxelize import VoxelSampler, voxelize_velocity

__all__ = [
    "dft3",
    "idft3",
    "encode_magnetization",
    "phase_difference_velocity",
    "simulate_kspace",
    "snr_to_sigma",
    "estimate_noise_std",
    "estimate_velocity_noise_std",
    "zero_filled_reconstruction",
    "make_spiral_mask",
    "make_gaussian_mask",
    "compose_masks",
    "VoxelSampler",
    "voxelize_velocity",
]
