"""KFE1 binary container for voxel fields, and PGM mask rendering.

Layout (all little-endian):

    offset  size  content
    0       4     magic bytes b"KFE1"
    4       1     dtype tag: 1 = float64, 2 = complex128, 3 = mask (uint8)
    5       12    dims, 3x uint32
    17      24    spacing (mm), 3x float64
    41      24    origin (mm), 3x float64
    65      8     mask target_R, float64 (0 unless dtype tag 3)
    73      1     mask pattern code (index into grids.MASK_PATTERNS; 0 otherwise)
    74      7     reserved, zero
    81      -     voxel payload, row-major with x fastest (Fortran order
                  over (nx, ny, nz))

Round trips are bit exact for all three field kinds.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from kflow.grids import MASK_PATTERNS, ComplexField, SamplingMask, ScalarField, VoxelGrid

MAGIC = b"KFE1"
_HEADER = struct.Struct("<4sB3I3d3ddB7x")

_TAG_SCALAR = 1
_TAG_COMPLEX = 2
_TAG_MASK = 3

_PAYLOAD_DTYPE = {
    _TAG_SCALAR: np.dtype("<f8"),
    _TAG_COMPLEX: np.dtype("<c16"),
    _TAG_MASK: np.dtype("u1"),
}


def _pack_header(tag: int, grid: VoxelGrid, target_R: float, pattern_code: int) -> bytes:
    nx, ny, nz = grid.dims
    sx, sy, sz = grid.spacing
    ox, oy, oz = grid.origin
    return _HEADER.pack(MAGIC, tag, nx, ny, nz, sx, sy, sz, ox, oy, oz, target_R, pattern_code)


def write_field(path, field) -> None:
    """Serialize a ScalarField, ComplexField or SamplingMask to `path`."""
    if isinstance(field, ScalarField):
        tag, payload, target_R, pcode = _TAG_SCALAR, field.values, 0.0, 0
    elif isinstance(field, ComplexField):
        tag, payload, target_R, pcode = _TAG_COMPLEX, field.values, 0.0, 0
    elif isinstance(field, SamplingMask):
        tag = _TAG_MASK
        payload = field.selected.astype(np.uint8)
        target_R = float(field.target_R)
        pcode = MASK_PATTERNS.index(field.pattern)
    else:
        raise TypeError(f"cannot serialize {type(field).__name__}")
    data = np.ascontiguousarray(payload.ravel(order="F"), dtype=_PAYLOAD_DTYPE[tag])
    with open(path, "wb") as fh:
        fh.write(_pack_header(tag, field.grid, target_R, pcode))
        fh.write(data.tobytes())


def read_field(path):
    """Load whatever field type `path` contains."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size or raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a KFE1 container")
    (_, tag, nx, ny, nz, sx, sy, sz, ox, oy, oz, target_R, pcode) = _HEADER.unpack_from(raw)
    if tag not in _PAYLOAD_DTYPE:
        raise ValueError(f"{path}: unknown dtype tag {tag}")
    grid = VoxelGrid((nx, ny, nz), (sx, sy, sz), (ox, oy, oz))
    dtype = _PAYLOAD_DTYPE[tag]
    expected = grid.voxel_count * dtype.itemsize
    payload = raw[_HEADER.size:]
    if len(payload) != expected:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype=dtype).reshape(grid.dims, order="F")
    if tag == _TAG_SCALAR:
        return ScalarField(grid, values.copy())
    if tag == _TAG_COMPLEX:
        return ComplexField(grid, values.copy())
    return SamplingMask(grid, values.astype(bool), target_R=target_R, pattern=MASK_PATTERNS[pcode])


def write_mask_pgm(path, mask: SamplingMask) -> None:
    """Render the in-plane pattern as a binary PGM, DC shifted to the center.

    Storage keeps DC at index 0; the shift happens only here, for visual
    comparison of sampling patterns.
    """
    plane = np.fft.fftshift(mask.inplane())
    img = np.where(plane, 255, 0).astype(np.uint8)
    nx, ny = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode())
        # rows of the image = ky, columns = kx
        fh.write(img.T.tobytes())
