"""Sampling finite element velocity fields onto voxel grids.

The model mesh is usually finer than the measurement grid; each voxel
takes the P1-interpolated value at its center. Voxel centers outside the
mesh are static tissue and read 0.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.spatial import cKDTree

from kflow.grids import ScalarField, VoxelGrid

_BARY_TOL = 1e-9


class VoxelSampler:
    """Precomputed voxel-center to element map for one (mesh, grid) pair.

    Builds a sparse interpolation operator once; sampling a nodal scalar
    field is then a single sparse mat-vec. `inside` flags voxels whose
    center lies in some element (the lumen map for magnitude modeling).
    """

    def __init__(self, mesh, grid: VoxelGrid):
        self.mesh = mesh
        self.grid = grid
        # mm voxel coordinates, cm mesh coordinates
        centers = grid.voxel_centers() / 10.0
        tet_nodes = mesh.nodes[mesh.tets]  # (nt, 4, 3)
        origin = tet_nodes[:, 0, :]
        basis = np.transpose(tet_nodes[:, 1:, :] - origin[:, None, :], (0, 2, 1))
        self._inv_basis = np.linalg.inv(basis)  # (nt, 3, 3)
        self._origin = origin
        centroids = tet_nodes.mean(axis=1)
        radius = np.sqrt(((tet_nodes - centroids[:, None, :]) ** 2).sum(axis=2)).max()
        tree = cKDTree(centroids)

        nvox = centers.shape[0]
        element = np.full(nvox, -1, dtype=np.int64)
        bary = np.zeros((nvox, 4))
        pending = np.arange(nvox)
        for k in (4, 32):
            if pending.size == 0:
                break
            _, cand = tree.query(centers[pending], k=min(k, len(centroids)))
            cand = np.atleast_2d(cand)
            found, fb = self._locate(centers[pending], cand)
            hit = found >= 0
            element[pending[hit]] = found[hit]
            bary[pending[hit]] = fb[hit]
            pending = pending[~hit]
        if pending.size:
            for v in pending:
                cand = tree.query_ball_point(centers[v], r=2.0 * radius)
                if cand:
                    found, fb = self._locate(centers[v:v + 1], np.asarray([cand]))
                    if found[0] >= 0:
                        element[v] = found[0]
                        bary[v] = fb[0]

        self.inside = (element >= 0).reshape(grid.dims, order="F")
        hits = np.flatnonzero(element >= 0)
        rows = np.repeat(hits, 4)
        cols = mesh.tets[element[hits]].ravel()
        vals = bary[hits].ravel()
        self._op = csr_matrix(
            (vals, (rows, cols)), shape=(nvox, mesh.node_count)
        )

    def _locate(self, points, candidates):
        """Barycentric containment test of points against candidate tets."""
        n, k = candidates.shape
        local = points[:, None, :] - self._origin[candidates]
        lam = np.einsum("nkij,nkj->nki", self._inv_basis[candidates], local)
        lam0 = 1.0 - lam.sum(axis=2)
        all_lam = np.concatenate([lam0[:, :, None], lam], axis=2)
        ok = (all_lam >= -_BARY_TOL).all(axis=2)
        first = np.argmax(ok, axis=1)
        found = np.where(ok.any(axis=1), candidates[np.arange(n), first], -1)
        bary = all_lam[np.arange(n), first]
        return found, bary

    def sample_nodal(self, nodal_values: np.ndarray) -> ScalarField:
        """Interpolate a per-node scalar onto the grid (0 outside the mesh)."""
        vox = self._op @ np.asarray(nodal_values, dtype=np.float64)
        return ScalarField(self.grid, vox.reshape(self.grid.dims, order="F"))


def voxelize_velocity(solution, mesh, grid: VoxelGrid, direction) -> ScalarField:
    """Directional velocity of a FlowState sampled at voxel centers."""
    direction = np.asarray(direction, dtype=np.float64)
    norm = np.linalg.norm(direction)
    if not np.isclose(norm, 1.0, atol=1e-9):
        raise ValueError("direction must be a unit vector")
    sampler = VoxelSampler(mesh, grid)
    return sampler.sample_nodal(solution.u @ direction)
