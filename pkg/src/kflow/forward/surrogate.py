"""0D surrogate forward model: a pulse inflow split among parallel
Windkessel branches.

Implements the same contract as the full solver (step, advance, state
vectors, voxel observation) so the filter can be exercised in
milliseconds. The update is the exact backward-Euler discretization of
the network

    sum_l q_l = Q_in(t),   P = Rp_l q_l + pi_l,   C_l dpi_l/dt + pi_l/Rd_l = q_l,

with a common junction pressure P. Observations paint the branch flows
into equal bands along x of a voxel grid, as a stand-in velocity image.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from kflow.forward.inflow import InflowProfile, inflow_value
from kflow.forward.windkessel import WindkesselParams, windkessel_coefficients
from kflow.grids import ScalarField, VoxelGrid


@dataclass
class NetworkState:
    q: np.ndarray  # branch flows
    pi: np.ndarray  # distal pressures
    t: float = 0.0

    def copy(self) -> "NetworkState":
        return NetworkState(self.q.copy(), self.pi.copy(), self.t)


class SurrogateNetworkModel:
    def __init__(
        self,
        branches: list[WindkesselParams],
        inflow: InflowProfile,
        tau: float = 1e-3,
        grid: VoxelGrid | None = None,
    ):
        if not branches:
            raise ValueError("need at least one branch")
        self.branches = list(branches)
        self.inflow = inflow
        self._tau = float(tau)
        self.grid = grid or VoxelGrid((8, 8, 1))
        for wk in branches:
            _, _, gamma = windkessel_coefficients(wk, self._tau)
            if gamma <= 0:
                raise ValueError("every branch needs Rp > 0 or a compartment")

    @property
    def tau(self) -> float:
        return self._tau

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    def set_parameters(self, params: dict[str, float]) -> None:
        for name, value in params.items():
            if name == "U":
                self.inflow = replace(self.inflow, U=float(value))
                continue
            key, idx = name[:-1], name[-1]
            if not idx.isdigit() or key not in ("Rp", "Rd", "C"):
                raise KeyError(f"unknown parameter {name!r}")
            i = int(idx)
            self.branches[i] = replace(self.branches[i], **{key: float(value)})

    def initial_state(self) -> NetworkState:
        k = self.n_branches
        return NetworkState(np.zeros(k), np.zeros(k), 0.0)

    def step(self, state: NetworkState, params: dict[str, float] | None = None) -> NetworkState:
        if params:
            self.set_parameters(params)
        t_new = state.t + self._tau
        q_in = self.inflow.U * inflow_value(self.inflow, t_new)
        coeffs = [windkessel_coefficients(wk, self._tau) for wk in self.branches]
        inv_gamma = np.array([1.0 / g for _, _, g in coeffs])
        alpha = np.array([a for a, _, _ in coeffs])
        beta = np.array([b for _, b, _ in coeffs])
        P = (q_in + np.sum(alpha * state.pi * inv_gamma)) / inv_gamma.sum()
        q = (P - alpha * state.pi) * inv_gamma
        pi = alpha * state.pi + beta * q
        return NetworkState(q, pi, t_new)

    def advance(self, state: NetworkState, params: dict[str, float] | None, n_steps: int) -> NetworkState:
        if params:
            self.set_parameters(params)
        for _ in range(n_steps):
            state = self.step(state)
        return state

    def state_to_vector(self, state: NetworkState) -> np.ndarray:
        return np.concatenate([state.q, state.pi])

    def vector_to_state(self, vec: np.ndarray, t: float) -> NetworkState:
        k = self.n_branches
        return NetworkState(vec[:k].copy(), vec[k:].copy(), t)

    def observe(self, state: NetworkState, direction=None) -> ScalarField:
        """Branch flows painted into K equal bands along x."""
        nx = self.grid.dims[0]
        values = np.zeros(self.grid.dims)
        edges = np.linspace(0, nx, self.n_branches + 1).astype(int)
        for k in range(self.n_branches):
            values[edges[k]: edges[k + 1]] = state.q[k]
        return ScalarField(self.grid, values)
