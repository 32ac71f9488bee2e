"""Developed inflow profiles from a steady Stokes solve.

The profile is the velocity trace on the inlet of a pressure-driven
Stokes flow through the whole domain (unit traction at the inlet,
traction-free outlets, no-slip walls), normalized to unit mean inward
normal velocity. On a straight circular tube this recovers the parabolic
Poiseuille profile.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import bmat, csr_matrix
from scipy.sparse.linalg import spsolve

from kflow.forward.fem import BoundaryPatch, P1Geometry
from kflow.forward.mesh import Mesh

_BP_STAB = 0.1  # Brezzi-Pitkaranta pressure stabilization, scaled by h^2/mu


def solve_stokes_flow(mesh: Mesh, mu: float = 1.0) -> np.ndarray:
    """Full-domain velocity of the unit-pressure-driven Stokes problem.

    Normalized so the mean inward normal velocity on the inlet is one.
    Besides feeding the inlet profile, this is a useful initializer for
    steady regressions of the time stepper.
    """
    geom = P1Geometry(mesh)
    n = geom.n_nodes
    K = geom.vector_viscous(mu)
    G = geom.gradient_ops()

    # h^2-weighted pressure stiffness for P1/P1 stability
    h2 = geom.h**2
    vals = np.einsum("e,eiv,ejv->eij", geom.vols * h2, geom.grads, geom.grads)
    L = geom.scalar_pattern.build(vals)

    inlet = BoundaryPatch(mesh, "inlet")
    wall_nodes = (
        np.unique(mesh.boundary["wall"]) if "wall" in mesh.boundary else np.array([], dtype=int)
    )

    GT = [csr_matrix(Gc.T) for Gc in G]
    # continuity row G u + beta*L p = 0 keeps the pressure Schur complement
    # G K^-1 G^T + beta*L positive definite
    A = bmat(
        [
            [K, bmat([[-GT[0]], [-GT[1]], [-GT[2]]])],
            [bmat([[G[0], G[1], G[2]]]), (_BP_STAB / mu) * L],
        ],
        format="csr",
    )
    # unit traction -n on the inlet, integrated against the P1 basis
    wn = np.zeros((n, 3))
    per_entry = np.repeat(inlet.areas / 3.0, 3)[:, None] * np.repeat(inlet.normals, 3, axis=0)
    np.add.at(wn, inlet.faces.ravel(), per_entry)
    rhs = np.zeros(4 * n)
    for c in range(3):
        rhs[c * n: (c + 1) * n] = -wn[:, c]

    # eliminate no-slip wall dofs
    keep = np.ones(4 * n, dtype=bool)
    for c in range(3):
        keep[wall_nodes + c * n] = False
    idx = np.flatnonzero(keep)
    sol = np.zeros(4 * n)
    reduced = A[idx][:, idx].tocsc()
    sol[idx] = spsolve(reduced, rhs[idx])
    if not np.all(np.isfinite(sol)):
        raise RuntimeError("Stokes solve produced non-finite values (degenerate mesh?)")

    u = sol[: 3 * n].reshape(n, 3, order="F")
    mean_inward = -inlet.flux(u) / inlet.total_area
    if abs(mean_inward) < 1e-14:
        raise RuntimeError("Stokes flow has zero net inflow")
    return u / mean_inward


def solve_stokes_profile(mesh: Mesh, mu: float = 1.0) -> np.ndarray:
    """Nodal velocity field supported on the inlet, unit mean normal component.

    Returns an (n, 3) array that is zero away from the inlet; multiply by
    U*f(t) to obtain Dirichlet inflow data.
    """
    u = solve_stokes_flow(mesh, mu)
    inlet_nodes = np.unique(mesh.boundary["inlet"])
    profile = np.zeros_like(u)
    profile[inlet_nodes] = u[inlet_nodes]
    return profile
