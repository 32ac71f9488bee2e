"""P1 tetrahedral finite element machinery.

Vector degrees of freedom are component-major: dof = comp*N + node, so a
nodal field u of shape (N, 3) flattens as u.ravel(order="F").

The per-time-step operator (convection, skew correction, streamline
stabilization, outlet backflow) is scalar, identical for each velocity
component; only the constant viscous matrix couples components. The
scalar assembly runs through a compiled kernel when available (see
kflow.forward.kernels).
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix

from kflow.forward.mesh import Mesh


class COOPattern:
    """Fixed sparsity pattern with a precomputed duplicate-sum reduction.

    Building csr_matrix from COO triplets re-sorts on every call; for the
    per-step matrices the (rows, cols) never change, so the sort and the
    duplicate layout are computed once and each assembly reduces straight
    into the csr data array.
    """

    def __init__(self, rows, cols, shape):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        self.shape = shape
        self._order = np.lexsort((cols, rows))
        r, c = rows[self._order], cols[self._order]
        new_group = np.empty(r.size, dtype=bool)
        new_group[0] = True
        new_group[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
        self._starts = np.flatnonzero(new_group)
        ur, uc = r[self._starts], c[self._starts]
        indptr = np.zeros(shape[0] + 1, dtype=np.int64)
        np.add.at(indptr, ur + 1, 1)
        np.cumsum(indptr, out=indptr)
        self._indptr = indptr
        self._indices = uc.astype(np.int32)

    def build(self, values) -> csr_matrix:
        values = np.asarray(values, dtype=np.float64).ravel()
        data = np.add.reduceat(values[self._order], self._starts)
        return csr_matrix((data, self._indices, self._indptr), shape=self.shape, copy=False)


def _element_geometry(mesh: Mesh):
    x = mesh.nodes[mesh.tets]  # (ne, 4, 3)
    e1, e2, e3 = (x[:, i, :] - x[:, 0, :] for i in (1, 2, 3))
    vol6 = np.einsum("ij,ij->i", np.cross(e1, e2), e3)
    vols = vol6 / 6.0
    J = np.stack([e1, e2, e3], axis=1)  # rows are edge vectors
    Jinv = np.linalg.inv(J)
    g123 = np.transpose(Jinv, (0, 2, 1))  # (ne, 3, 3); row k is grad lambda_{k+1}
    grads = np.zeros((len(mesh.tets), 4, 3))
    grads[:, 1:, :] = g123
    grads[:, 0, :] = -g123.sum(axis=1)
    edges = x[:, (0, 0, 0, 1, 1, 2), :] - x[:, (1, 2, 3, 2, 3, 3), :]
    h = np.sqrt((edges**2).sum(axis=2)).max(axis=1)
    return grads, vols, h


# element mass template: integral of lambda_i lambda_j = V/20 * (1 + delta_ij)
MASS_TEMPLATE = (np.ones((4, 4)) + np.eye(4)) / 20.0
# face mass template on triangles: integral of phi_i phi_j = A/12 * (1 + delta_ij)
FACE_MASS_TEMPLATE = (np.ones((3, 3)) + np.eye(3)) / 12.0


class BoundaryPatch:
    """One tagged boundary piece: faces, outward normals and integrals."""

    def __init__(self, mesh: Mesh, tag: str):
        faces = mesh.boundary[tag]
        self.tag = tag
        self.faces = faces
        p0, p1, p2 = (mesh.nodes[faces[:, i]] for i in range(3))
        cross = np.cross(p1 - p0, p2 - p0)
        area2 = np.linalg.norm(cross, axis=1)
        self.areas = 0.5 * area2
        normals = cross / area2[:, None]
        # orient outward using the owning tet's opposite vertex
        owner, opposite = _face_owners(mesh, faces)
        self.owner_tet = owner
        centroid = (p0 + p1 + p2) / 3.0
        inward = np.einsum("ij,ij->i", mesh.nodes[opposite] - centroid, normals) > 0
        normals[inward] *= -1.0
        self.normals = normals
        self.total_area = float(self.areas.sum())
        # nodal weights of the surface integral of phi_i
        w = np.zeros(mesh.node_count)
        np.add.at(w, faces.ravel(), np.repeat(self.areas / 3.0, 3))
        self.node_weights = w

    def flux(self, u: np.ndarray) -> float:
        """Integral of u . n over the patch for nodal u of shape (N, 3)."""
        un = np.einsum("fiv,fv->fi", u[self.faces], self.normals)
        return float((self.areas / 3.0) @ un.sum(axis=1))

    def mean(self, p: np.ndarray) -> float:
        return float(self.node_weights @ p) / self.total_area

    def face_normal_velocity(self, u: np.ndarray) -> np.ndarray:
        """Face-mean normal velocity, used by the backflow stabilization."""
        un = np.einsum("fiv,fv->fi", u[self.faces], self.normals)
        return un.mean(axis=1)


def _face_owners(mesh: Mesh, faces):
    lookup = {}
    for e, tet in enumerate(mesh.tets):
        for tri, opp in (((0, 1, 2), 3), ((0, 1, 3), 2), ((0, 2, 3), 1), ((1, 2, 3), 0)):
            key = tuple(sorted(int(tet[i]) for i in tri))
            lookup[key] = (e, int(tet[opp]))
    owner = np.empty(len(faces), dtype=np.int64)
    opposite = np.empty(len(faces), dtype=np.int64)
    for k, f in enumerate(faces):
        owner[k], opposite[k] = lookup[tuple(sorted(int(i) for i in f))]
    return owner, opposite


class P1Geometry:
    """Element data and constant matrices for one mesh."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.grads, self.vols, self.h = _element_geometry(mesh)
        n = mesh.node_count
        self.n_nodes = n
        tets = mesh.tets.astype(np.int64)
        self.elem_rows = np.repeat(tets, 4, axis=1).ravel()  # i index, 16 per element
        self.elem_cols = np.tile(tets, (1, 4)).ravel()  # j index
        self.scalar_pattern = COOPattern(self.elem_rows, self.elem_cols, (n, n))

    def scalar_mass(self) -> csr_matrix:
        vals = self.vols[:, None, None] * MASS_TEMPLATE
        return self.scalar_pattern.build(vals)

    def scalar_stiffness(self) -> csr_matrix:
        vals = np.einsum("e,eiv,ejv->eij", self.vols, self.grads, self.grads)
        return self.scalar_pattern.build(vals)

    def gradient_ops(self) -> list[csr_matrix]:
        """G_c with (G_c p)_i = integral of (d p / d x_c) * lambda_i."""
        ops = []
        for c in range(3):
            vals = np.broadcast_to(
                (self.vols[:, None] * self.grads[:, :, c] / 4.0)[:, None, :], (len(self.vols), 4, 4)
            )
            ops.append(self.scalar_pattern.build(np.ascontiguousarray(vals)))
        return ops

    def vector_viscous(self, mu: float) -> csr_matrix:
        """2*mu*(eps(u), eps(v)) in component-major dof ordering."""
        n = self.n_nodes
        gg = np.einsum("eiv,ejv->eij", self.grads, self.grads)  # grad dot grad
        rows, cols, vals = [], [], []
        for a in range(3):
            for b in range(3):
                block = np.einsum("ei,ej->eij", self.grads[:, :, b], self.grads[:, :, a])
                if a == b:
                    block = block + gg
                block = mu * self.vols[:, None, None] * block
                rows.append(self.elem_rows + a * n)
                cols.append(self.elem_cols + b * n)
                vals.append(block.ravel())
        mat = csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(3 * n, 3 * n),
        )
        mat.sum_duplicates()
        return mat

    def tangential_pressure_stab(self, patches) -> csr_matrix:
        """Sum over outlets of (T(grad p), T(grad q)) with T the tangential part."""
        n = self.n_nodes
        rows, cols, vals = [], [], []
        for patch in patches:
            tets = self.mesh.tets[patch.owner_tet].astype(np.int64)
            G = self.grads[patch.owner_tet]  # (nf, 4, 3)
            nrm = patch.normals
            Gn = np.einsum("fiv,fv->fi", G, nrm)
            Gt = G - Gn[:, :, None] * nrm[:, None, :]
            block = patch.areas[:, None, None] * np.einsum("fiv,fjv->fij", Gt, Gt)
            rows.append(np.repeat(tets, 4, axis=1).ravel())
            cols.append(np.tile(tets, (1, 4)).ravel())
            vals.append(block.ravel())
        if not rows:
            return csr_matrix((n, n))
        mat = csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )
        mat.sum_duplicates()
        return mat
