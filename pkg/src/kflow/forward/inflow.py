"""Inflow boundary data: temporal pulse shapes and spatial profiles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class InflowProfile:
    """Temporal pulse and spatial shape of the Dirichlet inflow.

    kind "AorticPulse": sin(pi*t/T) during systole, then a decaying
    diastolic tail (pi/T)*(t-T)*exp(-kappa*(t-T)) up to the cycle end T_c.
    kind "PhantomPulse": sin(pi*t/T) up to 3T/4, then
    sin(3*pi/4)*(1 - t + 3T/4)*exp(-(t - 3T/4)*beta), shaped to a pump.
    kind "Constant": f(t) = 1, for steady regressions.

    `spatial` selects a plug profile along the inward normal or the
    normalized Stokes profile solved on the mesh.
    """

    kind: str = "AorticPulse"
    U: float = 75.0
    T: float = 0.36
    T_c: float = 0.80
    kappa: float = 70.0
    beta: float = 5.0
    spatial: str = "PlugNormal"

    def __post_init__(self):
        if self.kind not in ("AorticPulse", "PhantomPulse", "Constant"):
            raise ValueError(f"unknown inflow kind {self.kind!r}")
        if self.spatial not in ("PlugNormal", "StokesProfile"):
            raise ValueError(f"unknown spatial profile {self.spatial!r}")
        if self.kind == "AorticPulse" and not 0 < self.T < self.T_c:
            raise ValueError("AorticPulse requires 0 < T < T_c")


def inflow_value(profile: InflowProfile, t: float) -> float:
    """Dimensionless pulse value f(t); the amplitude U multiplies downstream."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if profile.kind == "Constant":
        return 1.0
    T = profile.T
    if profile.kind == "AorticPulse":
        if t <= T:
            return float(np.sin(np.pi * t / T))
        return float((np.pi / T) * (t - T) * np.exp(-profile.kappa * (t - T)))
    # PhantomPulse
    t_s = 0.75 * T
    if t <= t_s:
        return float(np.sin(np.pi * t / T))
    return float(np.sin(0.75 * np.pi) * (1.0 - t + t_s) * np.exp(-(t - t_s) * profile.beta))
