"""Closed triangle surface meshes with per-triangle frames.

Each triangle (p1, p2, p3), ordered counter-clockwise about the outward
normal, carries unit edge tangents tau_j (edge opposite vertex j, running
p2 -> p3, p3 -> p1, p1 -> p2), in-plane outward edge normals
nu_j = tau_j x n and heights h_j = (p_i - p_j) . nu_j.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numba as nb
import numpy as np
from scipy.spatial import cKDTree

from pwdi.geometry import CUBE_FACES

log = logging.getLogger(__name__)

AREA_RTOL = 1e-12


class MeshError(ValueError):
    """Malformed, open, non-manifold or inconsistently oriented mesh."""


class MeshParseError(MeshError):
    pass


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable closed triangle mesh.

    Parameters
    ----------
    nodes : (n_nodes, 3) float
    tris : (n_tris, 3) int, counter-clockwise seen from outside
    """

    nodes: np.ndarray
    tris: np.ndarray
    name: str = ""
    _frames: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        tris = np.ascontiguousarray(self.tris, dtype=np.int64)
        if nodes.ndim != 2 or nodes.shape[1] != 3 or tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshError("nodes must be (n, 3) and tris (m, 3)")
        if tris.size and (tris.min() < 0 or tris.max() >= nodes.shape[0]):
            raise MeshError("triangle references a missing node")
        nodes.setflags(write=False)
        tris.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "tris", tris)
        check_closed(tris)
        self._build_frames()

    def _build_frames(self):
        p = self.nodes[self.tris]  # (m, 3 vertices, 3)
        c = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        a2 = np.linalg.norm(c, axis=1)
        scale = np.max(np.linalg.norm(p[:, 1] - p[:, 0], axis=1)) ** 2 if len(p) else 1.0
        if np.any(a2 <= AREA_RTOL * scale):
            raise MeshError(f"{int(np.sum(a2 <= AREA_RTOL * scale))} degenerate triangle(s)")
        n = c / a2[:, None]
        # tau_j runs along the edge opposite vertex j
        edges = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
        elen = np.linalg.norm(edges, axis=-1)
        tau = edges / elen[..., None]
        nu = np.cross(tau, n[:, None, :])
        h = np.einsum("tji,tji->tj", p[:, [1, 2, 0]] - p, nu)
        if np.any(h <= 0):
            raise MeshError("non-positive triangle height")
        f = dict(area=0.5 * a2, normal=n, tau=tau, nu=nu, heights=h, edge_lengths=elen)
        for v in f.values():
            v.setflags(write=False)
        self._frames.update(f)
        vol = np.sum(np.einsum("ti,ti->t", p[:, 0], c)) / 6.0
        if vol <= 0:
            raise MeshError("triangles are oriented inward (negative enclosed volume)")

    # per-triangle data
    @property
    def area(self) -> np.ndarray:
        return self._frames["area"]

    @property
    def normal(self) -> np.ndarray:
        return self._frames["normal"]

    @property
    def tau(self) -> np.ndarray:
        """(n_tris, 3, 3): unit tangent of the edge opposite each vertex."""
        return self._frames["tau"]

    @property
    def nu(self) -> np.ndarray:
        """(n_tris, 3, 3): in-plane outward normal of the edge opposite each vertex."""
        return self._frames["nu"]

    @property
    def heights(self) -> np.ndarray:
        return self._frames["heights"]

    @property
    def frame(self) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal tangent frame e1 = nu_1, e2 = tau_1 with e1 x e2 = n."""
        return self.nu[:, 0], self.tau[:, 0]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_tris(self) -> int:
        return self.tris.shape[0]

    @property
    def h(self) -> float:
        """Mesh size: the longest edge."""
        return float(self._frames["edge_lengths"].max())

    @property
    def total_area(self) -> float:
        return float(self.area.sum())

    @property
    def volume(self) -> float:
        p = self.nodes[self.tris]
        return float(np.sum(np.einsum("ti,ti->t", p[:, 0], np.cross(p[:, 1], p[:, 2]))) / 6.0)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.tris].mean(axis=1)

    @cached_property
    def node_weights(self) -> np.ndarray:
        """Vertex-rule weights sum_{K ∋ q} |K| / 3."""
        w = np.zeros(self.n_nodes)
        np.add.at(w, self.tris.ravel(), np.repeat(self.area / 3.0, 3))
        return w

    @cached_property
    def node_moments(self) -> np.ndarray:
        """Area-weighted normals sum_{K ∋ q} |K| n_K / 3 (the vertex rule for normal kernels)."""
        m = np.zeros((self.n_nodes, 3))
        np.add.at(m, self.tris.ravel(), np.repeat(self.area[:, None] * self.normal / 3.0, 3, axis=0))
        return m

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(self.centroids)

    def translated(self, shift) -> "TriMesh":
        return TriMesh(self.nodes + np.asarray(shift, dtype=float), self.tris, self.name)


def check_closed(tris: np.ndarray) -> None:
    """Every edge must be shared by exactly two triangles traversing it oppositely."""
    directed = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    if np.any(directed[:, 0] == directed[:, 1]):
        raise MeshError("triangle with repeated vertex")
    und = np.sort(directed, axis=1)
    _, counts = np.unique(und, axis=0, return_counts=True)
    if np.any(counts == 1):
        raise MeshError(f"open surface: {int(np.sum(counts == 1))} boundary edge(s)")
    if np.any(counts > 2):
        raise MeshError(f"non-manifold: {int(np.sum(counts > 2))} edge(s) shared by more than two triangles")
    _, dcounts = np.unique(directed, axis=0, return_counts=True)
    if np.any(dcounts > 1):
        raise MeshError(f"inconsistent orientation: {int(np.sum(dcounts > 1))} edge(s) traversed twice in the same direction")


# --------------------------------------------------------------------------
# file formats
# --------------------------------------------------------------------------
def _tokens(text: str):
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


def parse_off(text: str) -> tuple[np.ndarray, np.ndarray]:
    lines = list(_tokens(text))
    if not lines or not lines[0].startswith("OFF"):
        raise MeshParseError("missing OFF header")
    head = lines[0][3:].split()
    rest = lines[1:]
    if not head:
        if not rest:
            raise MeshParseError("missing OFF counts line")
        head, rest = rest[0].split(), rest[1:]
    try:
        nv, nf = int(head[0]), int(head[1])
        nodes = np.array([[float(v) for v in rest[i].split()[:3]] for i in range(nv)])
        tris = []
        for line in rest[nv : nv + nf]:
            vals = line.split()
            if int(vals[0]) != 3:
                raise MeshParseError(f"only triangles are supported, got a {vals[0]}-gon")
            tris.append([int(v) for v in vals[1:4]])
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshParseError):
            raise
        raise MeshParseError(f"malformed OFF data: {exc}") from exc
    if nodes.shape != (nv, 3) or len(tris) != nf:
        raise MeshParseError("OFF counts do not match the data")
    return nodes, np.array(tris, dtype=np.int64).reshape(-1, 3)


def _section(lines: list[str], name: str) -> list[str]:
    try:
        i = lines.index(f"${name}")
        j = lines.index(f"$End{name}", i)
    except ValueError as exc:
        raise MeshParseError(f"missing ${name} section") from exc
    return lines[i + 1 : j]


MSH_TRIANGLE = 2
MSH_SKIPPED = {1, 15}  # 2-node lines and points carry no surface


def parse_msh(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Gmsh MSH 2.x ASCII: $Nodes and $Elements with 3-node triangles (type 2).

    Point and line elements are ignored; any other element type is an error.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    fmt = _section(lines, "MeshFormat")
    if not fmt or not fmt[0].split()[0].startswith("2") or fmt[0].split()[1] != "0":
        raise MeshParseError("only ASCII MSH version 2 is supported")
    try:
        nsec = _section(lines, "Nodes")
        nn = int(nsec[0])
        ids, xyz = [], []
        for ln in nsec[1 : nn + 1]:
            v = ln.split()
            ids.append(int(v[0]))
            xyz.append([float(c) for c in v[1:4]])
        esec = _section(lines, "Elements")
        ne = int(esec[0])
        tris = []
        for ln in esec[1 : ne + 1]:
            v = [int(c) for c in ln.split()]
            if v[1] in MSH_SKIPPED:
                continue
            if v[1] != MSH_TRIANGLE:
                raise MeshParseError(f"unsupported element type {v[1]} (only 3-node triangles)")
            ntags = v[2]
            tris.append(v[3 + ntags : 6 + ntags])
    except (IndexError, ValueError) as exc:
        raise MeshParseError(f"malformed MSH data: {exc}") from exc
    index = {i: n for n, i in enumerate(ids)}
    try:
        tris = np.array([[index[i] for i in t] for t in tris], dtype=np.int64).reshape(-1, 3)
    except KeyError as exc:
        raise MeshParseError(f"element references unknown node {exc}") from exc
    return np.array(xyz, dtype=float).reshape(-1, 3), tris


def _drop_unused(nodes, tris):
    used = np.unique(tris)
    if used.size == nodes.shape[0]:
        return nodes, tris
    remap = np.full(nodes.shape[0], -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    return nodes[used], remap[tris]


def load_trimesh(path) -> TriMesh:
    """Read an OFF or MSH v2 ASCII file into a :class:`TriMesh`."""
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("OFF"):
        nodes, tris = parse_off(text)
    elif text.lstrip().startswith("$MeshFormat"):
        nodes, tris = parse_msh(text)
    else:
        raise MeshParseError(f"{path.name}: unrecognized mesh format")
    nodes, tris = _drop_unused(nodes, tris)
    return TriMesh(nodes, tris, path.stem)


def write_off(mesh: TriMesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"OFF\n{mesh.n_nodes} {mesh.n_tris} 0\n")
        for x in mesh.nodes:
            fh.write(f"{x[0]:.17g} {x[1]:.17g} {x[2]:.17g}\n")
        for t in mesh.tris:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


# --------------------------------------------------------------------------
# built-in meshes
# --------------------------------------------------------------------------
def _merge(points: np.ndarray, tris: np.ndarray, tol: float = 1e-10):
    key = np.round(points / tol).astype(np.int64)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    return points[first], inverse.reshape(-1)[tris]


def cube_sphere_mesh(radius: float = 1.0, n: int = 8, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Equiangular cube-sphere triangulation: n x n quads per face, 6 n^2 + 2 nodes.

    Each quad is split along its shorter diagonal.
    """
    if radius <= 0 or n < 1:
        raise ValueError("radius > 0 and n >= 1 required")
    t = np.tan(np.pi / 4 * np.linspace(-1.0, 1.0, n + 1))
    pts, tris = [], []
    for f, (axis, u, v) in enumerate(CUBE_FACES):
        A, B = np.meshgrid(t, t, indexing="ij")
        c = np.asarray(axis, float) + A[..., None] * np.asarray(u, float) + B[..., None] * np.asarray(v, float)
        x = c / np.linalg.norm(c, axis=-1, keepdims=True)
        base = f * (n + 1) ** 2
        pts.append(x.reshape(-1, 3))
        idx = base + np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
        for i in range(n):
            for j in range(n):
                a, b, c_, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
                if np.linalg.norm(x[i, j] - x[i + 1, j + 1]) <= np.linalg.norm(x[i + 1, j] - x[i, j + 1]):
                    tris += [(a, b, c_), (a, c_, d)]
                else:
                    tris += [(a, b, d), (b, c_, d)]
    nodes, tris = _merge(np.concatenate(pts), np.array(tris))
    return TriMesh(radius * nodes + np.asarray(center, float), tris, f"sphere-n{n}")


def make_trimesh_sphere(radius: float = 1.0, h_target: float | None = None, n: int | None = None,
                        center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Sphere mesh with the coarsest cube-sphere refinement whose longest edge is <= h_target.

    Pass ``n`` instead to choose the per-face subdivision directly.
    """
    if n is None:
        if h_target is None or h_target <= 0:
            raise ValueError("give h_target > 0 or n")
        # longest edge is a quad diagonal near the face centres, ~ (pi/2) sqrt2 / n
        n = max(1, int(np.ceil(np.pi / 2 * np.sqrt(2) * radius / h_target)) - 2)
        while True:
            mesh = cube_sphere_mesh(radius, n, center)
            if mesh.h <= h_target:
                return mesh
            n += 1
    return cube_sphere_mesh(radius, n, center)


def _stitch(inner: np.ndarray, ai: np.ndarray, outer: np.ndarray, ao: np.ndarray) -> list:
    """Triangulate the annulus between two rings of nodes (angles in [0, 2 pi))."""
    if inner.size == 1:
        no = outer.size
        return [(inner[0], outer[j], outer[(j + 1) % no]) for j in range(no)]
    io = np.argsort(ai)
    inner, ai = inner[io], ai[io]
    oo = np.argsort(np.mod(ao - ai[0], 2 * np.pi))
    outer, ao = outer[oo], np.mod(ao[oo] - ai[0], 2 * np.pi)
    ti = np.append(ai - ai[0], 2 * np.pi)
    to = np.append(ao, ao[0] + 2 * np.pi)
    ni, no = inner.size, outer.size
    tris = []
    i = j = 0
    # sweep both rings by angle, advancing whichever next node comes first
    while i < ni or j < no:
        if j < no and (i >= ni or to[j + 1] <= ti[i + 1]):
            tris.append((inner[i % ni], outer[j % no], outer[(j + 1) % no]))
            j += 1
        else:
            tris.append((inner[i % ni], outer[j % no], inner[(i + 1) % ni]))
            i += 1
    return tris


def _rings(counts):
    """Node angles and index ranges for rings with the given node counts."""
    angles, index, start = [], [], 0
    for m, c in enumerate(counts):
        off = 0.0 if m == len(counts) - 1 else 0.5 * (m % 2)
        angles.append(2 * np.pi * (np.arange(c) + off) / c)
        index.append(np.arange(start, start + c))
        start += c
    return angles, index


def _ring_mesh(counts):
    angles, index = _rings(counts)
    tris = []
    for m in range(1, len(counts)):
        tris += _stitch(index[m - 1], angles[m - 1], index[m], angles[m])
    return angles, index, np.array(tris, dtype=np.int64)


def hemisphere_mesh(radius: float = 1.0, nr: int = 8, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Closed half ball z >= center_z: a dome over a flat disk, sharing the rim ring.

    The dome has ``nr`` rings of equal polar spacing pi / (2 nr); every ring
    (dome and base) carries about one node per polar step of arc length.
    """
    if radius <= 0 or nr < 1:
        raise ValueError("radius > 0 and nr >= 1 required")
    rim = 4 * nr
    theta = np.pi / 2 * np.arange(nr + 1) / nr
    dome_counts = [1] + [max(6, int(round(rim * np.sin(t)))) for t in theta[1:-1]] + [rim]
    ad, idd, td = _ring_mesh(dome_counts)
    dome = np.concatenate([
        np.stack([np.sin(t) * np.cos(a), np.sin(t) * np.sin(a), np.full(a.size, np.cos(t))], axis=-1)
        for t, a in zip(theta, ad)
    ])
    nb = max(1, int(round(2 * nr / np.pi)))
    rho = np.arange(nb + 1) / nb
    base_counts = [1] + [max(6, int(round(rim * r))) for r in rho[1:-1]] + [rim]
    ab, ib, tb = _ring_mesh(base_counts)
    base = np.concatenate([np.stack([r * np.cos(a), r * np.sin(a), np.zeros(a.size)], axis=-1) for r, a in zip(rho, ab)])
    # base interior nodes are appended; its rim ring is the dome rim
    nd = dome.shape[0]
    n_in = ib[-1][0]
    bmap = np.concatenate([nd + np.arange(n_in), idd[-1]])
    base_tris = bmap[tb][:, ::-1]
    nodes = np.concatenate([dome, base[:n_in]]) * radius + np.asarray(center, float)
    return TriMesh(nodes, np.concatenate([td, base_tris]), f"hemisphere-n{nr}")


def make_trimesh_hemisphere(radius: float = 1.0, h_target: float = 0.2, center=(0.0, 0.0, 0.0)) -> TriMesh:
    nr = max(1, int(np.ceil(np.pi / 2 * radius / h_target)) - 1)
    while True:
        mesh = hemisphere_mesh(radius, nr, center)
        if mesh.h <= h_target:
            return mesh
        nr += 1


def tetrahedron() -> TriMesh:
    """Regular tetrahedron inscribed in the unit sphere."""
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / np.sqrt(3)
    return TriMesh(v, np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]), "tetrahedron")


# --------------------------------------------------------------------------
# point queries
# --------------------------------------------------------------------------
@nb.njit(cache=True)
def _winding(X, nodes, tris):
    out = np.zeros(X.shape[0])
    for i in range(X.shape[0]):
        s = 0.0
        for t in range(tris.shape[0]):
            a = nodes[tris[t, 0]] - X[i]
            b = nodes[tris[t, 1]] - X[i]
            c = nodes[tris[t, 2]] - X[i]
            la = np.sqrt(a @ a)
            lb = np.sqrt(b @ b)
            lc = np.sqrt(c @ c)
            det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
            den = la * lb * lc + (a @ b) * lc + (b @ c) * la + (c @ a) * lb
            s += 2.0 * np.arctan2(det, den)
        out[i] = s / (4.0 * np.pi)
    return out


def winding_number(mesh: TriMesh, X) -> np.ndarray:
    """Generalized winding number (solid angle / 4 pi): 1 inside, 0 outside."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    return _winding(X, mesh.nodes, mesh.tris)


def inside(mesh: TriMesh, X) -> np.ndarray:
    return winding_number(mesh, X) > 0.5


def closest_point_on_triangles(X, A, B, C):
    """Nearest points of triangles (A, B, C) to X, all (n, 3); returns points and barycentrics."""
    X, A, B, C = (np.asarray(v, dtype=float) for v in (X, A, B, C))
    ab, ac, ap = B - A, C - A, X - A
    d1 = np.einsum("ni,ni->n", ab, ap)
    d2 = np.einsum("ni,ni->n", ac, ap)
    bp = X - B
    d3 = np.einsum("ni,ni->n", ab, bp)
    d4 = np.einsum("ni,ni->n", ac, bp)
    cp = X - C
    d5 = np.einsum("ni,ni->n", ab, cp)
    d6 = np.einsum("ni,ni->n", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    n = X.shape[0]
    bary = np.zeros((n, 3))
    done = np.zeros(n, dtype=bool)

    def put(mask, w):
        m = mask & ~done
        bary[m] = w[m] if w.ndim == 2 else w
        done[m] = True

    one = np.ones(n)
    zero = np.zeros(n)
    put((d1 <= 0) & (d2 <= 0), np.stack([one, zero, zero], 1))
    put((d3 >= 0) & (d4 <= d3), np.stack([zero, one, zero], 1))
    put((d6 >= 0) & (d5 <= d6), np.stack([zero, zero, one], 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        v = d1 / (d1 - d3)
        put((vc <= 0) & (d1 >= 0) & (d3 <= 0), np.stack([1 - v, v, zero], 1))
        w = d2 / (d2 - d6)
        put((vb <= 0) & (d2 >= 0) & (d6 <= 0), np.stack([1 - w, zero, w], 1))
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        put((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), np.stack([zero, 1 - w, w], 1))
        den = va + vb + vc
        v = vb / den
        w = vc / den
    put(np.ones(n, dtype=bool), np.stack([1 - v - w, v, w], 1))
    P = bary[:, :1] * A + bary[:, 1:2] * B + bary[:, 2:] * C
    return P, bary


@dataclass(frozen=True)
class MeshProjection:
    """Nearest surface point p* of each target: triangle, point, barycentrics, distance."""

    tri: np.ndarray
    point: np.ndarray
    bary: np.ndarray
    distance: np.ndarray
    ambiguous: np.ndarray


def project_to_mesh(mesh: TriMesh, X, tie_rtol: float = 1e-9) -> MeshProjection:
    """Exact nearest point over all triangles near each target.

    Candidates are the triangles whose centroid lies within (nearest
    centroid distance + longest edge) of the target, which always contains
    the true nearest triangle. Ties go to the lowest triangle index and are
    flagged when a different triangle is within ``tie_rtol * h``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    tree = mesh._tree
    d0, _ = tree.query(X)
    cand = tree.query_ball_point(X, d0 + mesh.h)
    lens = np.array([len(c) for c in cand])
    rows = np.repeat(np.arange(n), lens)
    cols = np.concatenate([np.sort(np.asarray(c, dtype=np.int64)) for c in cand]) if n else np.zeros(0, np.int64)
    V = mesh.nodes[mesh.tris[cols]]
    P, bary = closest_point_on_triangles(X[rows], V[:, 0], V[:, 1], V[:, 2])
    dist = np.linalg.norm(X[rows] - P, axis=1)
    tri = np.empty(n, dtype=np.int64)
    pt = np.empty((n, 3))
    bc = np.empty((n, 3))
    dd = np.empty(n)
    amb = np.zeros(n, dtype=bool)
    starts = np.concatenate([[0], np.cumsum(lens)])
    tol = tie_rtol * mesh.h
    for i in range(n):
        s, e = starts[i], starts[i + 1]
        loc = dist[s:e]
        j = int(np.argmin(loc))  # first minimum = lowest triangle index
        close = loc <= loc[j] + tol
        if np.count_nonzero(close) > 1:
            # several triangles share the nearest point when it sits on an edge
            # or vertex; only distinct points make the anchor ambiguous
            pts = P[s:e][close]
            amb[i] = np.any(np.linalg.norm(pts - P[s + j], axis=1) > tol)
        tri[i] = cols[s + j]
        pt[i] = P[s + j]
        bc[i] = bary[s + j]
        dd[i] = loc[j]
    if np.any(amb):
        log.info("nearest surface point ambiguous for %d target(s)", int(amb.sum()))
    return MeshProjection(tri, pt, bc, dd, amb)


def node_valence(mesh: TriMesh) -> Counter:
    """Histogram of node valences (diagnostics)."""
    val = np.bincount(mesh.tris.ravel(), minlength=mesh.n_nodes)
    return Counter(val.tolist())
