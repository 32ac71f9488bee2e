"""Innovation operators for the three objective functions.

All residuals flatten voxels in the documented x-fastest order. The
k-space innovation stacks real and imaginary residuals over selected
voxels only; unselected entries are structurally zero and would dilute
the weighting if they were kept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kflow.grids import ComplexField, SamplingMask, ScalarField, same_grid
from kflow.imaging.encoding import encode_magnetization
from kflow.imaging.fourier import dft3

INNOVATION_KINDS = ("Velocity", "WrappedVelocity", "KSpace")


@dataclass
class CoilSpec:
    """Per-coil observation data: magnitude, background phase, noise, mask."""

    M: ScalarField
    phi_back: ScalarField
    sigma: float
    mask: SamplingMask


@dataclass
class InnovationSpec:
    """Which innovation drives the filter, and its observation data."""

    kind: str = "KSpace"
    venc: float = 1.0
    M: ScalarField | None = None
    phi_back: ScalarField | None = None
    mask: SamplingMask | None = None
    sigma: float = 1.0
    coils: list[CoilSpec] | None = None

    def __post_init__(self):
        if self.kind not in INNOVATION_KINDS:
            raise ValueError(f"unknown innovation kind {self.kind!r}")
        sigmas = [c.sigma for c in self.coils] if self.coils else [self.sigma]
        if any(s <= 0 for s in sigmas):
            raise ValueError("noise std must be positive for every channel")
        if self.kind == "KSpace" and not self.coils:
            if self.M is None or self.phi_back is None or self.mask is None:
                raise ValueError("KSpace innovation requires M, phi_back and mask")


def innovation_velocity(V: ScalarField, Hu: ScalarField) -> np.ndarray:
    same_grid(V, Hu)
    return V.ravel() - Hu.ravel()


def innovation_wrapped(V: ScalarField, Hu: ScalarField, venc: float) -> np.ndarray:
    """Aliasing-compensated residual (venc/pi)*sin((pi/venc)*(V - Hu)).

    Converges to the plain velocity innovation as venc grows and treats
    residuals that differ by multiples of 2*venc as equivalent.
    """
    if venc <= 0:
        raise ValueError("venc must be positive")
    delta = innovation_velocity(V, Hu)
    return (venc / np.pi) * np.sin((np.pi / venc) * delta)


def innovation_kspace(
    Y: ComplexField,
    u_model: ScalarField,
    M: ScalarField,
    phi_back: ScalarField,
    venc: float,
    mask: SamplingMask,
) -> np.ndarray:
    """Stacked [Re; Im] residual of Y - F(M*exp(i((pi/venc)u + phi_back))) * S."""
    if M is None or phi_back is None:
        raise ValueError("KSpace innovation requires M and phi_back")
    same_grid(Y, u_model, M, phi_back, mask)
    h_f = dft3(encode_magnetization(M, u_model, phi_back, venc))
    sel = mask.selected
    resid = Y.values[sel] - h_f.values[sel]
    return np.concatenate([resid.real, resid.imag])


def stack_coils(
    specs: list[CoilSpec], Y_coils: list[ComplexField], u_model: ScalarField, venc: float
) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated per-coil k-space innovations and the block weight.

    Each coil is an independent measurement; the returned weight is the
    diagonal of W, sigma_c^2 repeated over that coil's residual entries.
    """
    if not specs:
        raise ValueError("need at least one coil")
    if len(specs) != len(Y_coils):
        raise ValueError("one measurement per coil required")
    residuals, weights = [], []
    for spec, Y in zip(specs, Y_coils):
        gamma = innovation_kspace(Y, u_model, spec.M, spec.phi_back, venc, spec.mask)
        residuals.append(gamma)
        weights.append(np.full(gamma.size, spec.sigma**2))
    return np.concatenate(residuals), np.concatenate(weights)
