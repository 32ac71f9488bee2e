"""NumPy implementation of the per-step scalar element kernel.

Computes, per tetrahedron, the 4x4 block of

    rho*(w . grad u, v) + (rho/2)*((div w) u, v) + delta_K*(w . grad u, w . grad v)

with delta_K = delta * h^2 / (4*mu/rho + h*|w_mean|). The compiled
variant in _assembly.pyx mirrors this exactly; results agree to roundoff
(summation order inside a block differs between the backends).
"""

from __future__ import annotations

import numpy as np

from kflow.forward.fem import MASS_TEMPLATE


def convection_supg_values(tets, grads, vols, h, w, rho, delta, visc4_over_rho):
    wk = w[tets]  # (ne, 4, 3)
    a = np.einsum("ekv,ejv->ekj", wk, grads)  # a[k, j] = w_k . grad(lambda_j)
    M = vols[:, None, None] * MASS_TEMPLATE
    conv = np.einsum("eik,ekj->eij", M, a)
    div_w = np.einsum("ekk->e", a)
    w_mean = np.linalg.norm(wk.mean(axis=1), axis=1)
    delta_k = delta * h**2 / (visc4_over_rho + h * w_mean)
    supg = np.einsum("eki,ekl,elj->eij", a, M, a)
    vals = rho * conv + (0.5 * rho) * div_w[:, None, None] * M + delta_k[:, None, None] * supg
    return vals.reshape(len(tets), 16)
