import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwdi import mesh as M
from pwdi.mesh import MeshError, MeshParseError, TriMesh

MSH = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
10 0.5773502691896258 0.5773502691896258 0.5773502691896258
20 0.5773502691896258 -0.5773502691896258 -0.5773502691896258
30 -0.5773502691896258 0.5773502691896258 -0.5773502691896258
40 -0.5773502691896258 -0.5773502691896258 0.5773502691896258
$EndNodes
$Elements
5
1 15 2 0 1 10
2 2 2 0 1 10 20 30
3 2 2 0 1 10 40 20
4 2 2 0 1 10 30 40
5 2 2 0 1 20 40 30
$EndElements
"""


@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_cube_sphere_counts(n):
    m = M.cube_sphere_mesh(1.0, n)
    assert m.n_nodes == 6 * n * n + 2
    assert m.n_tris == 12 * n * n
    assert np.allclose(np.linalg.norm(m.nodes, axis=1), 1.0)
    assert np.all(m.area > 0)
    # outward: the face normal points away from the centre
    assert np.all(np.einsum("ti,ti->t", m.normal, m.centroids) > 0)


def test_sphere_area_and_volume_converge():
    errs = []
    for n in (4, 8, 16):
        m = M.cube_sphere_mesh(1.0, n)
        errs.append((abs(m.total_area - 4 * np.pi), abs(m.volume - 4 * np.pi / 3)))
    errs = np.array(errs)
    assert np.all(errs[1:] < errs[:-1] / 3)


def test_h_target_selection():
    m = M.make_trimesh_sphere(1.0, h_target=0.3)
    assert m.h <= 0.3
    coarser = M.cube_sphere_mesh(1.0, int(round(np.sqrt((m.n_nodes - 2) / 6))) - 1)
    assert coarser.h > 0.3
    with pytest.raises(ValueError):
        M.make_trimesh_sphere(1.0)


def test_node_weights_partition_area(trisphere4):
    assert trisphere4.node_weights.sum() == pytest.approx(trisphere4.total_area, rel=1e-14)
    # the weighted normals of a closed surface sum to zero
    assert np.abs(trisphere4.node_moments.sum(axis=0)).max() < 1e-13


def test_frames_are_orthonormal(trisphere2):
    m = trisphere2
    n = m.normal[:, None, :]
    assert np.allclose(np.linalg.norm(m.normal, axis=-1), 1.0)
    for v in (m.tau, m.nu):
        assert np.allclose(np.linalg.norm(v, axis=-1), 1.0)
        assert np.abs(np.sum(v * n, axis=-1)).max() < 1e-14
    assert np.abs(np.sum(m.tau * m.nu, axis=-1)).max() < 1e-14
    e1, e2 = m.frame
    assert np.allclose(np.cross(e1, e2), m.normal)
    # heights times edge length is twice the area
    assert np.allclose(m.heights * m._frames["edge_lengths"], 2 * m.area[:, None])


def test_off_round_trip(tmp_path, trisphere2):
    p = tmp_path / "s.off"
    M.write_off(trisphere2, p)
    back = M.load_trimesh(p)
    assert np.array_equal(back.tris, trisphere2.tris)
    assert np.array_equal(back.nodes, trisphere2.nodes)
    assert back.name == "s"


def test_msh_load(tmp_path):
    p = tmp_path / "tet.msh"
    p.write_text(MSH)
    m = M.load_trimesh(p)
    ref = M.tetrahedron()
    assert m.n_nodes == 4 and m.n_tris == 4
    assert m.volume == pytest.approx(ref.volume, rel=1e-14)


def test_off_with_comments_and_unused_node(tmp_path):
    text = """OFF
# tetrahedron with a stray vertex
5 4 0
0.5773502691896258 0.5773502691896258 0.5773502691896258
0.5773502691896258 -0.5773502691896258 -0.5773502691896258
-0.5773502691896258 0.5773502691896258 -0.5773502691896258
9 9 9
-0.5773502691896258 -0.5773502691896258 0.5773502691896258
3 0 1 2
3 0 4 1
3 0 2 4
3 1 4 2
"""
    p = tmp_path / "t.off"
    p.write_text(text)
    m = M.load_trimesh(p)
    assert m.n_nodes == 4
    assert m.volume > 0


@pytest.mark.parametrize(
    "text",
    [
        "",
        "OFF\n",
        "OFF\n4 1 0\n0 0 0\n1 0 0\n",
        "OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n4 0 1 2 3\n",
        "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 x\n3 0 1 2\n",
    ],
)
def test_off_parse_errors(text):
    with pytest.raises(MeshParseError):
        M.parse_off(text)


@pytest.mark.parametrize(
    "text",
    [
        MSH.replace("2.2 0 8", "4.1 0 8"),
        MSH.replace("2 2 2 0 1 10 20 30", "2 3 2 0 1 10 20 30 40"),
        MSH.replace("5 2 2 0 1 20 40 30", "5 2 2 0 1 20 40 99"),
        MSH.replace("$EndNodes\n", ""),
    ],
)
def test_msh_parse_errors(text):
    with pytest.raises(MeshParseError):
        M.parse_msh(text)


def test_unknown_format(tmp_path):
    p = tmp_path / "x.stl"
    p.write_text("solid x\nendsolid\n")
    with pytest.raises(MeshParseError):
        M.load_trimesh(p)


def test_rejects_open_inverted_and_degenerate():
    tet = M.tetrahedron()
    with pytest.raises(MeshError, match="open"):
        TriMesh(tet.nodes, tet.tris[:3])
    with pytest.raises(MeshError, match="inward"):
        TriMesh(tet.nodes, tet.tris[:, ::-1])
    with pytest.raises(MeshError, match="orientation"):
        tris = tet.tris.copy()
        tris[0] = tris[0, ::-1]
        TriMesh(tet.nodes, tris)
    flat = tet.nodes.copy()
    flat[3] = (flat[0] + flat[1]) / 2  # collapses the faces through nodes 0, 1 and 3
    with pytest.raises(MeshError):
        TriMesh(flat, tet.tris)
    with pytest.raises(MeshError):
        TriMesh(tet.nodes, tet.tris + 1)
    with pytest.raises(MeshError):
        TriMesh(tet.nodes[:, :2], tet.tris)


def test_winding_number(trisphere4, rng):
    X = rng.uniform(-1.5, 1.5, size=(200, 3))
    r = np.linalg.norm(X, axis=1)
    X = X[np.abs(r - 1) > 0.1]
    w = M.winding_number(trisphere4, X)
    r = np.linalg.norm(X, axis=1)
    assert np.allclose(w, (r < 1).astype(float), atol=1e-10)
    assert np.array_equal(M.inside(trisphere4, X), r < 1)


def _brute_force(mesh, X):
    V = mesh.nodes[mesh.tris]
    best = np.full(X.shape[0], np.inf)
    for t in range(mesh.n_tris):
        P, _ = M.closest_point_on_triangles(X, *(np.broadcast_to(V[t, i], X.shape) for i in range(3)))
        best = np.minimum(best, np.linalg.norm(X - P, axis=1))
    return best


@settings(max_examples=20, deadline=None)
@given(st.lists(st.tuples(*[st.floats(-2, 2)] * 3), min_size=1, max_size=8))
def test_projection_matches_brute_force(pts):
    mesh = M.cube_sphere_mesh(1.0, 2)
    X = np.array(pts, dtype=float)
    proj = M.project_to_mesh(mesh, X)
    assert np.allclose(proj.distance, _brute_force(mesh, X), atol=1e-12)
    V = mesh.nodes[mesh.tris[proj.tri]]
    rebuilt = np.einsum("ni,nij->nj", proj.bary, V)
    assert np.allclose(rebuilt, proj.point, atol=1e-12)
    assert np.all(proj.bary >= -1e-12)


def test_closest_point_regions():
    A = np.array([[0.0, 0, 0]])
    B = np.array([[1.0, 0, 0]])
    C = np.array([[0.0, 1, 0]])
    cases = {
        (-1.0, -1.0, 0.5): (0, 0, 0),  # vertex A
        (0.5, -1.0, 0.0): (0.5, 0, 0),  # edge AB
        (1.0, 1.0, 0.0): (0.5, 0.5, 0),  # edge BC
        (0.2, 0.2, 3.0): (0.2, 0.2, 0),  # face
    }
    for x, p in cases.items():
        P, _ = M.closest_point_on_triangles(np.array([x]), A, B, C)
        assert np.allclose(P[0], p)


def test_ambiguous_projection_flag():
    # the centre of a sphere is equidistant from everything
    mesh = M.cube_sphere_mesh(1.0, 2)
    proj = M.project_to_mesh(mesh, np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.5]]))
    assert proj.ambiguous.tolist() == [True, False]


def test_hemisphere_mesh():
    errs = []
    for nr in (4, 8, 16):
        m = M.hemisphere_mesh(1.5, nr)
        assert np.all(m.nodes[:, 2] >= -1e-14)
        errs.append(abs(m.volume - 2 * np.pi / 3 * 1.5**3))
        flat = np.abs(m.normal[:, 2] + 1) < 1e-12
        assert flat.any()
        assert m.area[flat].sum() == pytest.approx(np.pi * 1.5**2, rel=0.05)
    assert errs[2] < errs[1] < errs[0]
    m = M.make_trimesh_hemisphere(1.0, 0.25)
    assert m.h <= 0.25


def test_translated():
    m = M.tetrahedron().translated([1.0, 2.0, 3.0])
    assert np.allclose(m.nodes.mean(axis=0), [1, 2, 3])
    assert m.volume == pytest.approx(M.tetrahedron().volume)
