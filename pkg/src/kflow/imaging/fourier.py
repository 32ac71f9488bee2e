"""Three-dimensional discrete Fourier transforms on voxel fields.

Conventions: the forward transform is unnormalized (no 1/N factor) and
the inverse carries the full 1/N. The DC component sits at index
(0, 0, 0); k runs over {0..n_axis-1} on each axis with no fftshift in
storage.
"""

from __future__ import annotations

import numpy as np

from kflow.grids import ComplexField


def dft3(field: ComplexField) -> ComplexField:
    """Unnormalized forward 3D DFT of a complex voxel field."""
    return ComplexField(field.grid, np.fft.fftn(field.values))


def idft3(kspace: ComplexField) -> ComplexField:
    """Inverse 3D DFT (carries the 1/N normalization)."""
    return ComplexField(kspace.grid, np.fft.ifftn(kspace.values))
