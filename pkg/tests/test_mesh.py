import numpy as np
import pytest

from kflow.forward.mesh import (
    Mesh,
    _face_counts,
    load_medit_mesh,
    load_mesh,
    save_mesh,
    tube_mesh,
    y_bifurcation_mesh,
)


@pytest.fixture(scope="module")
def tube():
    return tube_mesh()


@pytest.fixture(scope="module")
def wye():
    return y_bifurcation_mesh()


def signed_volumes(mesh):
    a, b, c, d = (mesh.nodes[mesh.tets[:, i]] for i in range(4))
    return np.einsum("ij,ij->i", np.cross(b - a, c - a), d - a) / 6.0


class TestGeometryValidity:
    @pytest.mark.parametrize("name", ["tube", "wye"])
    def test_positive_volumes(self, name, request):
        mesh = request.getfixturevalue(name)
        assert signed_volumes(mesh).min() > 0

    @pytest.mark.parametrize("name", ["tube", "wye"])
    def test_conforming_and_tag_partition(self, name, request):
        mesh = request.getfixturevalue(name)
        counts = _face_counts(mesh.tets)
        assert set(counts.values()) <= {1, 2}
        mesh.validate()

    def test_tube_volume_close_to_cylinder(self, tube):
        vol = signed_volumes(tube).sum()
        exact = np.pi * 0.5**2 * 3.0
        assert vol == pytest.approx(exact, rel=0.05)  # polygonal disc is inscribed

    def test_wye_outlet_count(self, wye):
        assert wye.outlet_tags == ["outlet0", "outlet1"]

    def test_wye_mirror_symmetric(self, wye):
        # every node has an exact mirror partner across x = 0
        key = {(round(-x, 12), round(y, 12), round(z, 12)): i for i, (x, y, z) in enumerate(wye.nodes)}
        for x, y, z in wye.nodes:
            assert (round(x, 12), round(y, 12), round(z, 12)) in key

    def test_inlet_in_plane(self, wye):
        inlet_nodes = np.unique(wye.boundary["inlet"])
        assert np.abs(wye.nodes[inlet_nodes][:, 1]).max() == 0.0


class TestIO:
    def test_native_round_trip(self, tmp_path, tube):
        path = tmp_path / "tube.kmesh"
        save_mesh(path, tube)
        back = load_mesh(path)
        assert np.array_equal(back.nodes, tube.nodes)
        assert np.array_equal(back.tets, tube.tets)
        for tag, faces in tube.boundary.items():
            assert np.array_equal(np.sort(back.boundary[tag], axis=None), np.sort(faces, axis=None))

    def test_medit_converter(self, tmp_path):
        # one tet, four tagged faces: inlet, two walls, one outlet
        text = """MeshVersionFormatted 2
Dimension 3
Vertices
4
0 0 0 1
1 0 0 1
0 1 0 1
0 0 1 1
Triangles
4
1 2 3 1
1 2 4 2
1 3 4 2
2 3 4 3
Tetrahedra
1
1 2 3 4 1
End
"""
        p = tmp_path / "one.mesh"
        p.write_text(text)
        mesh = load_medit_mesh(p)
        assert mesh.node_count == 4
        assert len(mesh.tets) == 1
        assert set(mesh.boundary) == {"inlet", "wall", "outlet0"}
        mesh.validate()

    def test_rejects_garbage(self, tmp_path):
        p = tmp_path / "bad.kmesh"
        p.write_text("not a mesh\n")
        with pytest.raises(ValueError):
            load_mesh(p)


class TestValidation:
    def test_detects_missing_tags(self, tube):
        broken = Mesh(tube.nodes.copy(), tube.tets.copy(), {"inlet": tube.boundary["inlet"]})
        with pytest.raises(ValueError):
            broken.validate()

    def test_degenerate_tet_rejected(self):
        nodes = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0.0]])  # coplanar
        with pytest.raises(ValueError):
            Mesh(nodes, np.array([[0, 1, 2, 3]], dtype=np.int32))
