"""Parameter priors and the internal reparameterizations.

The filter works in internal coordinates nu. "Exponential" maps
theta = theta0 * 2^nu (prior nu = 0), which keeps every parameter
positive for any nu. "Linear" maps theta = theta0 * nu (prior nu = 1)
and does not guarantee positivity; it is the fallback when the
exponential map destabilizes the estimation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

REPARAM_MODES = ("Exponential", "Linear")


@dataclass
class ParameterSet:
    names: list[str]
    theta0: np.ndarray  # prior mean, physical units
    P0: np.ndarray  # prior covariance of the internal coordinates
    reparam: str = "Exponential"

    def __post_init__(self):
        self.theta0 = np.atleast_1d(np.asarray(self.theta0, dtype=np.float64))
        P0 = np.asarray(self.P0, dtype=np.float64)
        if P0.ndim == 0:
            P0 = float(P0) * np.eye(self.p)
        self.P0 = P0
        if self.reparam not in REPARAM_MODES:
            raise ValueError(f"unknown reparameterization {self.reparam!r}")
        if len(self.names) != self.p or self.P0.shape != (self.p, self.p):
            raise ValueError("names/theta0/P0 sizes disagree")
        # SPD check up front; Cholesky failure here is a configuration error
        np.linalg.cholesky(self.P0)

    @property
    def p(self) -> int:
        return self.theta0.size

    def internal_prior(self) -> np.ndarray:
        return np.zeros(self.p) if self.reparam == "Exponential" else np.ones(self.p)

    def to_physical(self, nu: np.ndarray) -> np.ndarray:
        return reparam_to_physical(nu, self.theta0, self.reparam)


def reparam_to_physical(nu: np.ndarray, theta0: np.ndarray, mode: str) -> np.ndarray:
    nu = np.asarray(nu, dtype=np.float64)
    theta0 = np.asarray(theta0, dtype=np.float64)
    if mode == "Exponential":
        return theta0 * np.exp2(nu)
    if mode == "Linear":
        return theta0 * nu
    raise ValueError(f"unknown reparameterization {mode!r}")
