"""k-space sampling masks: pseudo-spiral and Gaussian-random patterns.

Masks are 2D in the kx-ky plane and replicated along kz (the z direction
is sampled fully). Coordinates are centered at DC during construction and
stored with DC at index 0, matching the DFT layout.
"""

from __future__ import annotations

import numpy as np

from kflow.grids import SamplingMask, VoxelGrid, same_grid

ACCELERATION_TOLERANCE = 0.10


def _replicate(grid: VoxelGrid, inplane: np.ndarray, target_R: float, pattern: str) -> SamplingMask:
    selected = np.repeat(inplane[:, :, None], grid.dims[2], axis=2)
    return SamplingMask(grid, selected, target_R=float(target_R), pattern=pattern)


def _spiral_points(nx: int, ny: int, turns: int, n_samples: int) -> np.ndarray:
    """Snap `n_samples` even-arc-length spiral samples to the k-lattice."""
    r_final = 0.5 * min(nx, ny)
    # Archimedean spiral r = a*phi, phi in [0, 2*pi*turns]
    phi_end = 2.0 * np.pi * turns
    a = r_final / phi_end
    phi_fine = np.linspace(0.0, phi_end, 20000)
    # arc length element sqrt(r'^2 + r^2) dphi = a*sqrt(1 + phi^2) dphi
    ds = a * np.sqrt(1.0 + phi_fine**2)
    s = np.concatenate([[0.0], np.cumsum(0.5 * (ds[1:] + ds[:-1]) * np.diff(phi_fine))])
    targets = np.linspace(0.0, s[-1], n_samples)
    phis = np.interp(targets, s, phi_fine)
    radii = a * phis
    kx = np.rint(radii * np.cos(phis)).astype(int)
    ky = np.rint(radii * np.sin(phis)).astype(int)
    kx = np.clip(kx, -(nx // 2), (nx - 1) // 2)
    ky = np.clip(ky, -(ny // 2), (ny - 1) // 2)
    return np.stack([kx, ky], axis=1)


def make_spiral_mask(grid: VoxelGrid, R: float, turns: int = 6) -> SamplingMask:
    """Deterministic pseudo-spiral mask with `turns` turns reaching the edge.

    Points are spaced evenly in arc length along an Archimedean spiral,
    snapped to the Cartesian lattice and deduplicated; the sample count is
    adjusted iteratively until the in-plane point count is within the
    acceleration tolerance of n_inplane / R. DC is always selected.
    """
    nx, ny, _ = grid.dims
    n_inplane = nx * ny
    if R < 1:
        raise ValueError("R must be >= 1")
    if R > n_inplane:
        raise ValueError(f"R={R} cannot select a point on a {nx}x{ny} plane")
    if R <= 1.0:
        return _replicate(grid, np.ones((nx, ny), dtype=bool), 1.0, "Spiral")

    target = n_inplane / R
    n_samples = max(int(target), 2)
    best = None
    for _ in range(60):
        pts = _spiral_points(nx, ny, turns, n_samples)
        inplane = np.zeros((nx, ny), dtype=bool)
        inplane[pts[:, 0] % nx, pts[:, 1] % ny] = True
        inplane[0, 0] = True
        count = int(inplane.sum())
        err = abs(count - target)
        if best is None or err < best[0]:
            best = (err, inplane)
        if err <= max(1.0, 0.02 * target):
            break
        # dedup saturates, so grow/shrink proportionally to the miss
        ratio = target / count
        step = max(1, int(round(abs(n_samples * (ratio - 1.0)))))
        n_samples = max(2, n_samples + step if ratio > 1 else n_samples - step)
    inplane = best[1]
    achieved = n_inplane / inplane.sum()
    if abs(achieved - R) > ACCELERATION_TOLERANCE * R:
        raise ValueError(f"spiral mask achieved R={achieved:.2f}, target {R}")
    return _replicate(grid, inplane, R, "Spiral")


def make_gaussian_mask(
    grid: VoxelGrid, R: float, sigma_frac: float = 1.0 / 6.0, seed: int = 0
) -> SamplingMask:
    """Random mask drawn from a DC-centered Gaussian density.

    Selects ceil(n_inplane / R) distinct in-plane points without
    replacement with probability proportional to
    exp(-(kx^2 + ky^2) / (2*(sigma_frac*n_min)^2)); DC is always forced
    in. Deterministic per seed. The default sigma_frac places 3 sigma at
    the k-space edge.
    """
    nx, ny, _ = grid.dims
    n_inplane = nx * ny
    if R < 1:
        raise ValueError("R must be >= 1")
    if R > n_inplane:
        raise ValueError(f"R={R} cannot select a point on a {nx}x{ny} plane")
    if sigma_frac <= 0:
        raise ValueError("sigma_frac must be positive")
    n_select = int(np.ceil(n_inplane / R))
    if n_select >= n_inplane:
        return _replicate(grid, np.ones((nx, ny), dtype=bool), 1.0, "GaussianRandom")

    kx = np.fft.fftfreq(nx, d=1.0 / nx)  # centered coordinates, DC first
    ky = np.fft.fftfreq(ny, d=1.0 / ny)
    r2 = kx[:, None] ** 2 + ky[None, :] ** 2
    sigma = sigma_frac * min(nx, ny)
    weights = np.exp(-r2 / (2.0 * sigma**2)).ravel(order="F")

    dc_flat = 0
    weights[dc_flat] = 0.0
    weights /= weights.sum()
    rng = np.random.default_rng(seed)
    others = rng.choice(n_inplane, size=n_select - 1, replace=False, p=weights)
    inplane = np.zeros(n_inplane, dtype=bool)
    inplane[dc_flat] = True
    inplane[others] = True
    return _replicate(grid, inplane.reshape((nx, ny), order="F"), R, "GaussianRandom")


def compose_masks(base: SamplingMask, overlay: SamplingMask) -> SamplingMask:
    """Intersection of two masks; target_R recomputed from the result."""
    grid = same_grid(base, overlay)
    selected = base.selected & overlay.selected
    if not selected.any():
        raise ValueError("mask intersection is empty")
    target_R = grid.voxel_count / selected.sum()
    return SamplingMask(grid, selected, target_R=float(target_R), pattern="Composed")
