"""kflow: boundary-condition estimation for incompressible flow models
directly from undersampled k-space PC-MRI measurements.

Subpackages
-----------
imaging   PC-MRI acquisition simulation: velocity encoding, 3D DFT,
          sampling masks, noise, baseline reconstructions, voxelization.
forward   Incompressible Navier-Stokes solver (fractional-step, P1/P1)
          with Windkessel outlets, plus a fast 0D surrogate network.
roukf     Reduced-Order Unscented Kalman Filter with canonical sigma
          points, pluggable forward models and three innovation kinds.
pipeline  CLI orchestration of twin experiments (generate / estimate /
          evaluate / mask / sweep).
"""

from kflow.grids import ComplexField, SamplingMask, ScalarField, VoxelGrid

__version__ = "0.1.0"

__all__ = [
    "VoxelGrid",
    "ScalarField",
    "ComplexField",
    "SamplingMask",
    "__version__",
]
