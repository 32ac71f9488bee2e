"""Tetrahedral P1 meshes: procedural desk-scale geometries and file I/O.

Coordinates are in cm. Boundary faces are tagged with "inlet", "wall" or
"outlet<i>"; the tags partition the boundary. Shipped geometries are a
straight circular tube (one outlet) and a planar-Y bifurcation slab (two
outlets), both generated procedurally: a 2D triangulation is extruded
into prism layers and each prism is split into three tetrahedra with the
smallest-global-index diagonal rule, which keeps neighboring splits
conforming.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay


@dataclass
class Mesh:
    nodes: np.ndarray  # (n, 3) float64, cm
    tets: np.ndarray  # (nt, 4) int32
    boundary: dict[str, np.ndarray] = field(default_factory=dict)  # tag -> (nf, 3) int32

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=np.float64)
        self.tets = np.ascontiguousarray(self.tets, dtype=np.int32)
        self.boundary = {k: np.ascontiguousarray(v, dtype=np.int32) for k, v in self.boundary.items()}
        self._fix_orientation()

    def _fix_orientation(self):
        vol6 = _signed_volumes6(self.nodes, self.tets)
        flip = vol6 < 0
        if flip.any():
            self.tets[flip, 2], self.tets[flip, 3] = (
                self.tets[flip, 3].copy(),
                self.tets[flip, 2].copy(),
            )
        if np.any(_signed_volumes6(self.nodes, self.tets) <= 0):
            raise ValueError("mesh contains degenerate tetrahedra")

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    @property
    def outlet_tags(self) -> list[str]:
        return sorted(t for t in self.boundary if t.startswith("outlet"))

    def validate(self):
        """Check volumes, boundary coverage and tag partition."""
        if np.any(_signed_volumes6(self.nodes, self.tets) <= 0):
            raise ValueError("non-positive element volume")
        counts = _face_counts(self.tets)
        boundary_faces = {f for f, c in counts.items() if c == 1}
        tagged = []
        for tag, faces in self.boundary.items():
            for f in faces:
                key = tuple(sorted(int(i) for i in f))
                if key not in boundary_faces:
                    raise ValueError(f"face {key} tagged {tag} is not a boundary face")
                tagged.append(key)
        if len(tagged) != len(set(tagged)):
            raise ValueError("a boundary face carries more than one tag")
        if set(tagged) != boundary_faces:
            raise ValueError(
                f"boundary partition mismatch: {len(tagged)} tagged vs "
                f"{len(boundary_faces)} boundary faces"
            )
        return self


def _signed_volumes6(nodes, tets):
    a, b, c, d = (nodes[tets[:, i]] for i in range(4))
    return np.einsum("ij,ij->i", np.cross(b - a, c - a), d - a)


def _face_counts(tets) -> dict:
    counts: dict[tuple, int] = {}
    for tet in tets:
        for tri in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
            key = tuple(sorted(int(tet[i]) for i in tri))
            counts[key] = counts.get(key, 0) + 1
    return counts


def boundary_faces_of(tets) -> np.ndarray:
    return np.array(
        sorted(f for f, c in _face_counts(tets).items() if c == 1), dtype=np.int32
    )


# ---------------------------------------------------------------------------
# prism extrusion


def _split_prism(bottom, top):
    """Split one prism into 3 tets using the min-vertex diagonal rule."""
    verts = list(bottom) + list(top)
    arg = int(np.argmin(verts))
    # rotate the prism so the global minimum sits at bottom position 0;
    # flipping upside down reverses the winding of both triangles
    if arg >= 3:
        bottom, top = (top[0], top[2], top[1]), (bottom[0], bottom[2], bottom[1])
        arg -= 3
        if arg == 2:
            arg = 1
        elif arg == 1:
            arg = 2
    r = arg
    b = (bottom[r], bottom[(r + 1) % 3], bottom[(r + 2) % 3])
    t = (top[r], top[(r + 1) % 3], top[(r + 2) % 3])
    b0, b1, b2 = b
    t0, t1, t2 = t
    if min(b1, t2) < min(b2, t1):
        return [(b0, b1, b2, t2), (b0, b1, t2, t1), (b0, t1, t2, t0)]
    return [(b0, b1, b2, t1), (b0, b2, t2, t1), (b0, t2, t0, t1)]


def extrude_triangulation(points2d, triangles, z_levels):
    """Extrude a 2D triangulation along z into a tetrahedral mesh.

    Returns (nodes, tets, layer_offset) where node i of layer l has index
    i + l*len(points2d).
    """
    points2d = np.asarray(points2d, dtype=np.float64)
    z_levels = np.asarray(z_levels, dtype=np.float64)
    n2d = points2d.shape[0]
    nodes = np.zeros((n2d * len(z_levels), 3))
    for l, z in enumerate(z_levels):
        nodes[l * n2d:(l + 1) * n2d, :2] = points2d
        nodes[l * n2d:(l + 1) * n2d, 2] = z
    tets = []
    for l in range(len(z_levels) - 1):
        off_b, off_t = l * n2d, (l + 1) * n2d
        for tri in triangles:
            bottom = tuple(int(v) + off_b for v in tri)
            top = tuple(int(v) + off_t for v in tri)
            tets.extend(_split_prism(bottom, top))
    return nodes, np.asarray(tets, dtype=np.int32), n2d


def _classify_by_node_sets(tets, node_sets: dict[str, set], default_tag="wall"):
    """Tag boundary faces whose nodes all belong to one named node set."""
    faces = boundary_faces_of(tets)
    tagged: dict[str, list] = {tag: [] for tag in node_sets}
    tagged[default_tag] = tagged.get(default_tag, [])
    for f in faces:
        fs = set(int(i) for i in f)
        for tag, nset in node_sets.items():
            if fs <= nset:
                tagged[tag].append(f)
                break
        else:
            tagged[default_tag].append(f)
    return {tag: np.asarray(fl, dtype=np.int32) for tag, fl in tagged.items() if fl}


# ---------------------------------------------------------------------------
# straight tube


def _disc_points(radius: float, rings: int) -> np.ndarray:
    pts = [(0.0, 0.0)]
    for i in range(1, rings + 1):
        r = radius * i / rings
        for k in range(6 * i):
            a = 2.0 * np.pi * k / (6 * i)
            pts.append((r * np.cos(a), r * np.sin(a)))
    return np.asarray(pts)


def _grade_end(levels: np.ndarray, splits: int) -> np.ndarray:
    """Refine the last interval `splits` times by bisection.

    The outlet-side elements carry the pressure-gradient trace that feeds
    the velocity correction; grading them keeps the discrete mass balance
    well under the 0.1% target.
    """
    levels = list(levels)
    for _ in range(splits):
        levels.insert(-1, 0.5 * (levels[-2] + levels[-1]))
    return np.asarray(levels)


def tube_mesh(
    radius: float = 0.5, length: float = 3.0, rings: int = 5, layers: int = 7, outlet_grading: int = 2
) -> Mesh:
    """Straight circular tube along z with inlet at z=0 and one outlet at z=length."""
    pts = _disc_points(radius, rings)
    tris = Delaunay(pts).simplices
    z = _grade_end(np.linspace(0.0, length, layers), outlet_grading)
    nodes, tets, n2d = extrude_triangulation(pts, tris, z)
    inlet = set(range(n2d))
    outlet = set(range(n2d * (len(z) - 1), n2d * len(z)))
    boundary = _classify_by_node_sets(tets, {"inlet": inlet, "outlet0": outlet})
    return Mesh(nodes, tets, boundary).validate()


# ---------------------------------------------------------------------------
# planar-Y bifurcation slab


def _half_y_triangulation(width, trunk_len, arm_len, angle_deg, nw, nt, na):
    """Triangulate the x>=0 half of the planar Y (half trunk + one arm).

    Returns (points, triangles, index maps) with nodes on x=0 first so the
    mirrored half can share them.
    """
    xs = np.linspace(0.0, width, nw + 1)
    ys = np.linspace(0.0, trunk_len, nt + 1)
    idx = {}
    pts = []

    def add(p):
        key = (round(p[0], 12), round(p[1], 12))
        if key not in idx:
            idx[key] = len(pts)
            pts.append(p)
        return idx[key]

    tris = []
    grid = [[add((x, y)) for x in xs] for y in ys]
    for j in range(nt):
        for i in range(nw):
            a, b = grid[j][i], grid[j][i + 1]
            c, d = grid[j + 1][i], grid[j + 1][i + 1]
            tris.append((a, b, d))
            tris.append((a, d, c))
    phi = np.deg2rad(angle_deg)
    d_arm = np.array([np.sin(phi), np.cos(phi)])
    s_rows = _grade_end(np.linspace(0.0, arm_len, na + 1), 2)
    arm = []
    for s in s_rows:
        row = []
        for i in range(nw + 1):
            base = np.array([xs[i], trunk_len])
            p = base + d_arm * s
            row.append(add((p[0], p[1])))
        arm.append(row)
    na = len(s_rows) - 1
    for j in range(na):
        for i in range(nw):
            a, b = arm[j][i], arm[j][i + 1]
            c, d = arm[j + 1][i], arm[j + 1][i + 1]
            tris.append((a, b, d))
            tris.append((a, d, c))
    pts = np.asarray(pts)
    inlet_edge = [grid[0][i] for i in range(nw + 1)]
    outlet_edge = [arm[na][i] for i in range(nw + 1)]
    return pts, np.asarray(tris, dtype=np.int64), inlet_edge, outlet_edge


def y_bifurcation_mesh(
    width: float = 1.2,
    trunk_len: float = 2.0,
    arm_len: float = 2.0,
    angle_deg: float = 40.0,
    thickness: float = 0.6,
    nw: int = 6,
    nt: int = 10,
    na: int = 9,
    nz: int = 4,
) -> Mesh:
    """Planar-Y bifurcation: slab trunk splitting into two symmetric arms.

    The trunk spans x in [-width, width]; each arm keeps width `width`.
    Built by mirroring the x>=0 half, so the mesh is exactly symmetric
    under x -> -x. Inlet at y=0, outlets at the arm ends, walls elsewhere
    (including the z faces of the slab).
    """
    pts, tris, inlet_edge, outlet_edge = _half_y_triangulation(
        width, trunk_len, arm_len, angle_deg, nw, nt, na
    )
    # mirror the half plane; nodes with x == 0 are shared
    n_half = len(pts)
    mirror = np.empty(n_half, dtype=np.int64)
    new_pts = list(map(tuple, pts))
    for i, (x, y) in enumerate(pts):
        if x == 0.0:
            mirror[i] = i
        else:
            mirror[i] = len(new_pts)
            new_pts.append((-x, y))
    all_tris = list(map(tuple, tris)) + [tuple(int(mirror[v]) for v in t) for t in tris]
    pts_full = np.asarray(new_pts)

    z = np.linspace(0.0, thickness, nz + 1)
    nodes, tets, n2d = extrude_triangulation(pts_full, all_tris, z)

    def column(indices2d):
        return {int(i) + l * n2d for i in indices2d for l in range(nz + 1)}

    inlet_nodes = column(inlet_edge) | column([mirror[i] for i in inlet_edge])
    out0 = column(outlet_edge)
    out1 = column([mirror[i] for i in outlet_edge])
    boundary = _classify_by_node_sets(
        tets, {"inlet": inlet_nodes, "outlet0": out0, "outlet1": out1}
    )
    return Mesh(nodes, tets, boundary).validate()


# ---------------------------------------------------------------------------
# file formats


def save_mesh(path, mesh: Mesh) -> None:
    """Native text format: node block, tet block, tagged face block."""
    lines = ["kflow-mesh 1", f"nodes {mesh.node_count}"]
    lines += [" ".join(repr(float(c)) for c in p) for p in mesh.nodes]
    lines.append(f"tets {len(mesh.tets)}")
    lines += [" ".join(str(int(v)) for v in t) for t in mesh.tets]
    nf = sum(len(v) for v in mesh.boundary.values())
    lines.append(f"faces {nf}")
    for tag in sorted(mesh.boundary):
        for f in mesh.boundary[tag]:
            lines.append(tag + " " + " ".join(str(int(v)) for v in f))
    Path(path).write_text("\n".join(lines) + "\n")


def load_mesh(path) -> Mesh:
    tokens = Path(path).read_text().split("\n")
    if not tokens or not tokens[0].startswith("kflow-mesh"):
        raise ValueError(f"{path}: not a kflow mesh file")
    pos = 1

    def expect(kw):
        nonlocal pos
        parts = tokens[pos].split()
        if parts[0] != kw:
            raise ValueError(f"{path}: expected '{kw}' block at line {pos + 1}")
        pos += 1
        return int(parts[1])

    n = expect("nodes")
    nodes = np.array([[float(x) for x in tokens[pos + i].split()] for i in range(n)])
    pos += n
    nt = expect("tets")
    tets = np.array([[int(x) for x in tokens[pos + i].split()] for i in range(nt)], dtype=np.int32)
    pos += nt
    nf = expect("faces")
    boundary: dict[str, list] = {}
    for i in range(nf):
        parts = tokens[pos + i].split()
        boundary.setdefault(parts[0], []).append([int(x) for x in parts[1:4]])
    return Mesh(nodes, tets, {k: np.asarray(v, dtype=np.int32) for k, v in boundary.items()})


def load_medit_mesh(path, tag_map: dict[int, str] | None = None) -> Mesh:
    """Convert a plain-text MEDIT .mesh file (Vertices/Tetrahedra/Triangles).

    Triangle reference numbers map to tags via `tag_map`; by default
    ref 1 -> inlet, ref 2 -> wall, ref k>=3 -> outlet{k-3}.
    """
    words = Path(path).read_text().split()
    i = 0
    nodes, tets, tris, refs = None, None, [], []

    def read_block(count, ncols):
        nonlocal i
        rows = np.array(words[i:i + count * ncols], dtype=float).reshape(count, ncols)
        i += count * ncols
        return rows

    while i < len(words):
        w = words[i].lower()
        i += 1
        if w == "vertices":
            count = int(words[i]); i += 1
            nodes = read_block(count, 4)[:, :3]
        elif w == "tetrahedra":
            count = int(words[i]); i += 1
            tets = read_block(count, 5)[:, :4].astype(np.int32) - 1
        elif w == "triangles":
            count = int(words[i]); i += 1
            block = read_block(count, 4).astype(np.int64)
            tris = block[:, :3] - 1
            refs = block[:, 3]
        elif w == "end":
            break
    if nodes is None or tets is None:
        raise ValueError(f"{path}: missing Vertices or Tetrahedra block")
    if tag_map is None:
        tag_map = {1: "inlet", 2: "wall"}
        for r in sorted(set(int(r) for r in refs)):
            if r >= 3:
                tag_map[r] = f"outlet{r - 3}"
    boundary: dict[str, list] = {}
    for tri, r in zip(tris, refs):
        boundary.setdefault(tag_map[int(r)], []).append(tri)
    return Mesh(nodes, tets, {k: np.asarray(v, dtype=np.int32) for k, v in boundary.items()})
