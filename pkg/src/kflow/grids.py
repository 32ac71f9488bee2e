"""Voxel grids and the fields living on them.

Arrays are held with shape (nx, ny, nz). Whenever a field is flattened
(residual vectors, binary payloads) the documented order is x fastest,
then y, then z, i.e. ``values.ravel(order="F")``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MASK_PATTERNS = ("Full", "Spiral", "GaussianRandom", "Composed")


@dataclass(frozen=True)
class VoxelGrid:
    """Regular voxel lattice: dims (nx, ny, nz), spacing and origin in mm."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ValueError(f"dims must be three integers >= 1, got {self.dims}")
        if len(spacing) != 3 or any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be three positives, got {self.spacing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @property
    def voxel_count(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def voxel_centers(self) -> np.ndarray:
        """Coordinates of all voxel centers, shape (nvox, 3), x fastest."""
        axes = [
            self.origin[a] + self.spacing[a] * (np.arange(self.dims[a]) + 0.5)
            for a in range(3)
        ]
        xs, ys, zs = np.meshgrid(*axes, indexing="ij")
        return np.stack(
            [xs.ravel(order="F"), ys.ravel(order="F"), zs.ravel(order="F")], axis=1
        )


def _check_values(grid: VoxelGrid, values: np.ndarray, dtype) -> np.ndarray:
    values = np.asarray(values, dtype=dtype)
    if values.shape != grid.dims:
        raise ValueError(f"values shape {values.shape} does not match grid {grid.dims}")
    return values


@dataclass
class ScalarField:
    """Real scalar per voxel (magnitude, background phase, velocity)."""

    grid: VoxelGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values, np.float64)

    @classmethod
    def full(cls, grid: VoxelGrid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.dims, float(value)))

    def ravel(self) -> np.ndarray:
        return self.values.ravel(order="F")


@dataclass
class ComplexField:
    """Complex scalar per voxel (magnetization images or k-space data)."""

    grid: VoxelGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values, np.complex128)

    def ravel(self) -> np.ndarray:
        return self.values.ravel(order="F")


@dataclass
class SamplingMask:
    """Boolean k-space selection with acceleration metadata.

    selected has the grid's shape; target_R is the requested acceleration
    (total voxels / selected voxels); pattern is one of MASK_PATTERNS.
    """

    grid: VoxelGrid
    selected: np.ndarray
    target_R: float = 1.0
    pattern: str = "Full"

    def __post_init__(self):
        self.selected = _check_values(self.grid, self.selected, bool)
        if self.pattern not in MASK_PATTERNS:
            raise ValueError(f"unknown mask pattern {self.pattern!r}")
        if not self.selected.any():
            raise ValueError("mask selects no voxels")

    @classmethod
    def full(cls, grid: VoxelGrid) -> "SamplingMask":
        return cls(grid, np.ones(grid.dims, dtype=bool), target_R=1.0, pattern="Full")

    @property
    def selected_count(self) -> int:
        return int(self.selected.sum())

    @property
    def achieved_R(self) -> float:
        return self.grid.voxel_count / self.selected_count

    def inplane(self) -> np.ndarray:
        """The (nx, ny) pattern, valid for masks replicated along z."""
        return self.selected[:, :, 0]


def same_grid(*fields) -> VoxelGrid:
    """Return the common grid of the given fields, or raise."""
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ValueError("fields live on different grids")
    return grid
