import numpy as np
import pytest

from kflow.forward import FlowState, tube_mesh
from kflow.grids import VoxelGrid
from kflow.imaging import VoxelSampler, voxelize_velocity


@pytest.fixture(scope="module")
def tube():
    return tube_mesh()


def tube_grid(spacing=2.0):
    # tube: radius 0.5 cm, length 3 cm along z; grid coordinates in mm
    n_xy = int(np.ceil(14.0 / spacing))
    n_z = int(np.ceil(34.0 / spacing))
    return VoxelGrid((n_xy, n_xy, n_z), (spacing,) * 3, (-n_xy * spacing / 2, -n_xy * spacing / 2, -2.0))


def state_with(mesh, u):
    return FlowState(u, np.zeros(len(mesh.nodes)), np.zeros(1), 0.0)


def test_constant_field_reproduced(tube):
    grid = tube_grid()
    c = 17.0
    u = np.zeros((tube.node_count, 3))
    u[:, 2] = c
    sampler = VoxelSampler(tube, grid)
    vox = sampler.sample_nodal(u[:, 2])
    assert sampler.inside.any()
    assert np.allclose(vox.values[sampler.inside], c)
    assert np.all(vox.values[~sampler.inside] == 0)


def test_linear_field_exact_at_centers(tube):
    grid = tube_grid()
    sampler = VoxelSampler(tube, grid)
    coeff = np.array([3.0, -2.0, 1.5])
    nodal = tube.nodes @ coeff + 0.7
    vox = sampler.sample_nodal(nodal)
    centers_cm = grid.voxel_centers() / 10.0
    expected = (centers_cm @ coeff + 0.7).reshape(grid.dims, order="F")
    inside = sampler.inside
    assert np.abs(vox.values[inside] - expected[inside]).max() < 1e-10


def test_poiseuille_interpolation_error_shrinks_with_mesh(tube):
    grid = tube_grid()
    fine = None
    errs = []
    for rings in (3, 6):
        from kflow.forward import tube_mesh as make

        mesh = make(rings=rings)
        sampler = VoxelSampler(mesh, grid)
        r2 = (mesh.nodes[:, 0] ** 2 + mesh.nodes[:, 1] ** 2) / 0.5**2
        nodal = 2.0 * (1.0 - r2)
        vox = sampler.sample_nodal(nodal)
        centers = grid.voxel_centers() / 10.0
        rr = (centers[:, 0] ** 2 + centers[:, 1] ** 2).reshape(grid.dims, order="F") / 0.5**2
        exact = 2.0 * (1.0 - rr)
        inside = sampler.inside
        errs.append(np.abs(vox.values[inside] - exact[inside]).max())
    assert errs[1] < errs[0]  # O(h^2) interpolation improves under refinement


def test_voxelize_velocity_direction(tube):
    grid = tube_grid()
    u = np.zeros((tube.node_count, 3))
    u[:, 2] = 5.0
    u[:, 0] = 2.0
    state = state_with(tube, u)
    vz = voxelize_velocity(state, tube, grid, (0.0, 0.0, 1.0))
    vx = voxelize_velocity(state, tube, grid, (1.0, 0.0, 0.0))
    inside = VoxelSampler(tube, grid).inside
    assert np.allclose(vz.values[inside], 5.0)
    assert np.allclose(vx.values[inside], 2.0)
    with pytest.raises(ValueError):
        voxelize_velocity(state, tube, grid, (1.0, 1.0, 0.0))


def test_outside_voxels_flagged(tube):
    grid = tube_grid()
    sampler = VoxelSampler(tube, grid)
    # corner voxels lie far outside the 0.5 cm tube
    assert not sampler.inside[0, 0, 0]
    n_in = sampler.inside.sum()
    vol_fraction = n_in * (0.2**3) / (np.pi * 0.5**2 * 3.0)
    assert 0.6 < vol_fraction < 1.3
