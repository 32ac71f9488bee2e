"""Lumped Windkessel outlet models and their semi-implicit update.

The three-element outlet couples the 3D pressure to a 0D compartment:

    P = Rp*Q + pi,      C dpi/dt + pi/Rd = Q.

Backward-Euler discretization with step tau gives, with D = C + tau/Rd,

    alpha = C/D,  beta = tau/D,  gamma = Rp + beta,
    Q^j  = (P^j - alpha*pi^{j-1}) / gamma,
    pi^j = (alpha - alpha*beta/gamma)*pi^{j-1} + (beta/gamma)*P^j.

A pure-resistance outlet (no C, Rd) has alpha = beta = 0, gamma = Rp and
keeps pi identically zero.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class WindkesselParams:
    """Per-outlet parameters; Rd and C absent encodes a pure resistance."""

    Rp: float = 0.0
    Rd: float | None = None
    C: float | None = None

    def __post_init__(self):
        if self.Rp < 0:
            raise ValueError("Rp must be non-negative")
        if (self.Rd is None) != (self.C is None):
            raise ValueError("Rd and C must be given together")
        if self.C is not None and (self.C <= 0 or self.Rd <= 0):
            raise ValueError("C and Rd must be positive when present")

    @property
    def has_compartment(self) -> bool:
        return self.C is not None


def windkessel_coefficients(params: WindkesselParams, tau: float) -> tuple[float, float, float]:
    """(alpha, beta, gamma) of the backward-Euler outlet update."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if not params.has_compartment:
        return 0.0, 0.0, params.Rp
    D = params.C + tau / params.Rd
    alpha = params.C / D
    beta = tau / D
    return alpha, beta, params.Rp + beta


def windkessel_update(pi_prev: float, P_outlet: float, params: WindkesselParams, tau: float) -> float:
    """Advance the distal pressure pi by one step given the outlet pressure."""
    if not params.has_compartment:
        return 0.0
    alpha, beta, gamma = windkessel_coefficients(params, tau)
    return (alpha - alpha * beta / gamma) * pi_prev + (beta / gamma) * P_outlet


def windkessel_update_flux(pi_prev: float, Q: float, params: WindkesselParams, tau: float) -> float:
    """Equivalent update driven by the outlet flux instead of the pressure."""
    if not params.has_compartment:
        return 0.0
    alpha, beta, _ = windkessel_coefficients(params, tau)
    return alpha * pi_prev + beta * Q
