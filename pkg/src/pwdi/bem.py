"""P1 Galerkin BEM with planewave density interpolation on triangle meshes.

Outer integrals use the interior three-point rule (barycentrics
(2/3, 1/6, 1/6) and permutations, weight |T|/3); inner integrals use the
vertex rule, which collapses into node weights sum |K|/3 and area-weighted
node normals sum |K| n_K / 3. The interpolant at an outer point is the
closed-form one on the flat triangle frame e1 = nu_1, e2 = tau_1.

The Galerkin matrices are assembled densely, one block of outer points at
a time; every correction from the interpolant is local to the outer
triangle (or, for layer potentials, to the triangle holding the nearest
point), so it enters as a sparse matrix.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from pwdi import kernels
from pwdi.geometry import SurfaceJet
from pwdi.linsolve import GMRESResult, KrylovConfig, gmres
from pwdi.mesh import TriMesh, inside, project_to_mesh
from pwdi.nystrom import expansions

log = logging.getLogger(__name__)

# v_j at the three interior points: (1 + 3 delta_jl) / 6
BARY = np.array([[4, 1, 1], [1, 4, 1], [1, 1, 4]], dtype=float) / 6.0
ROW_CHUNK = 1536
# layer potentials are regularized only at targets closer than this many mesh sizes
REG_RADIUS_FACTOR = 10.0
BEM_ORDERS = (0, 1)


def check_order(M: int) -> None:
    if M not in BEM_ORDERS:
        raise ValueError(f"BEM supports interpolation orders {BEM_ORDERS} on flat triangles, got M={M}")


@dataclass(frozen=True)
class GaussTriple:
    """Interior quadrature points (n_tris, 3, 3) and weights (n_tris, 3)."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def flat_points(self) -> np.ndarray:
        return self.points.reshape(-1, 3)

    @property
    def flat_weights(self) -> np.ndarray:
        return self.weights.reshape(-1)


def gauss_triple(mesh: TriMesh) -> GaussTriple:
    V = mesh.nodes[mesh.tris]
    pts = np.einsum("lj,tji->tli", BARY, V)
    w = np.repeat(mesh.area[:, None] / 3.0, 3, axis=1)
    return GaussTriple(pts, w)


def basis_derivatives(mesh: TriMesh):
    """Values and frame derivatives of the three local basis functions.

    Returns ``values`` (3, 3) with values[l, j] = v_j(p_l) and ``grads``
    (n_tris, 2, 3) with grads[t, a, j] = -e_a . nu_j / h_j, the same at
    every interior point since v_j is affine on T.
    """
    e1, e2 = mesh.frame
    g1 = -np.einsum("ti,tji->tj", e1, mesh.nu) / mesh.heights
    g2 = -np.einsum("ti,tji->tj", e2, mesh.nu) / mesh.heights
    return BARY.copy(), np.stack([g1, g2], axis=1)


def surface_gradients(mesh: TriMesh) -> np.ndarray:
    """grad_Gamma v_j = -nu_j / h_j on each triangle, (n_tris, 3, 3)."""
    return -mesh.nu / mesh.heights[..., None]


def surface_curls(mesh: TriMesh) -> np.ndarray:
    """curl_Gamma v_j = -n x grad_Gamma v_j = tau_j / h_j on each triangle, (n_tris, 3, 3)."""
    return mesh.tau / mesh.heights[..., None]


def local_jets(mesh: TriMesh, M: int) -> np.ndarray:
    """d^alpha v_j at every interior point, (n_tris, 3 points, n_alpha, 3 basis)."""
    vals, grads = basis_derivatives(mesh)
    nt = mesh.n_tris
    out = np.empty((nt, 3, 1 if M == 0 else 3, 3))
    out[:, :, 0, :] = vals[None]
    if M >= 1:
        out[:, :, 1:, :] = grads[:, None]
    return out


def anchor_jet(mesh: TriMesh, tri, points) -> SurfaceJet:
    """Flat-frame jets anchored at ``points`` lying on triangles ``tri``."""
    e1, e2 = mesh.frame
    return SurfaceJet.planar(points, e1[tri], e2[tri])


def interior_expansions(mesh: TriMesh, k: float, M: int, interp: str = "analytic"):
    g = gauss_triple(mesh)
    tri = np.repeat(np.arange(mesh.n_tris), 3)
    return expansions(anchor_jet(mesh, tri, g.flat_points), k, M, interp)


def _sparse_rows(values: np.ndarray, mesh: TriMesh, n_cols: int | None = None) -> sp.csr_matrix:
    """Rows indexed by interior point (t, l), columns by the nodes of t: values (n_tris, 3, 3)."""
    nt = mesh.n_tris
    rows = np.repeat(np.arange(3 * nt), 3)
    cols = np.repeat(mesh.tris, 3, axis=0).reshape(-1)
    return sp.csr_matrix((values.reshape(-1), (rows, cols)), shape=(3 * nt, n_cols or mesh.n_nodes))


def outer_matrix(mesh: TriMesh) -> sp.csr_matrix:
    """W[g, j] = (|T| / 3) v_j(p_g): outer quadrature against the test functions."""
    vals = mesh.area[:, None, None] / 3.0 * BARY[None]
    return _sparse_rows(vals, mesh)


def trace_matrix(mesh: TriMesh) -> sp.csr_matrix:
    """V[g, j] = v_j(p_g): nodal values to interior-point values."""
    return _sparse_rows(np.broadcast_to(BARY, (mesh.n_tris, 3, 3)).copy(), mesh)


def mass_matrix(mesh: TriMesh) -> sp.csr_matrix:
    """(v_i, v_j) by the interior rule, exact for P1 x P1."""
    return (outer_matrix(mesh).T @ trace_matrix(mesh)).tocsr()


def project_data(mesh: TriMesh, values_at_gauss) -> np.ndarray:
    """(v_j, f) for f sampled at the interior points (flat, n_tris * 3)."""
    return outer_matrix(mesh).T @ np.asarray(values_at_gauss)


def _source_rule(mesh: TriMesh):
    return (np.ascontiguousarray(mesh.nodes), np.ascontiguousarray(mesh.node_weights),
            np.ascontiguousarray(mesh.node_moments))


def _moment_coefficients(mesh: TriMesh, exp, k: float, lo: int, hi: int):
    """coefK, coefS (n, n_alpha) at interior points lo:hi.

    K psi(p) = plain - sum_a coefK-terms, S psi(p) = plain + coefS-terms, with
    coefK = -a . (E0 - E1) - trace(a)/2 and coefS = b . (E0 - E1) + trace(b)/2.
    """
    src, sw, sm = _source_rule(mesh)
    sub = exp.subset(slice(lo, hi))
    tgt = np.ascontiguousarray(sub.anchors)
    # the three interior points of a triangle share the frame directions
    dirs = np.ascontiguousarray(sub.directions[::3])
    E = kernels.moments_grouped(tgt, 3, dirs, src, sm, k, sub.paired)
    Ea = E[0] - E[1]
    coefK = -np.einsum("pat,pt->pa", sub.a, Ea) - 0.5 * sub.a.sum(axis=-1)
    coefS = np.einsum("pat,pt->pa", sub.b, Ea) + 0.5 * sub.b.sum(axis=-1)
    return coefK, coefS


def _local(mesh: TriMesh, jets: np.ndarray, coef: np.ndarray, lo: int, hi: int) -> sp.csr_matrix:
    """Rows lo:hi of sum_alpha coef[g, alpha] d^alpha v_j(p_g) as a sparse (hi-lo, n_nodes)."""
    J = jets.reshape(-1, jets.shape[2], 3)[lo:hi]
    vals = np.einsum("ga,gaj->gj", coef, J)
    rows = np.repeat(np.arange(hi - lo), 3)
    cols = np.repeat(mesh.tris, 3, axis=0)[lo:hi].reshape(-1)
    return sp.csr_matrix((vals.reshape(-1), (rows, cols)), shape=(hi - lo, mesh.n_nodes))


def _accumulate_rows(A, W_chunk: sp.csr_matrix, X) -> None:
    """A += W_chunk^T X touching only the rows W_chunk reaches."""
    Wt = W_chunk.T.tocsr()
    nz = np.flatnonzero(np.diff(Wt.indptr))
    part = Wt[nz] @ X
    A[nz] += part


def _accumulate_cols(A, W_chunk: sp.csr_matrix, X) -> None:
    """A += (W_chunk^T X)^T."""
    Wt = W_chunk.T.tocsr()
    nz = np.flatnonzero(np.diff(Wt.indptr))
    part = Wt[nz] @ X
    A[:, nz] += part.T


def _chunks(n: int, size: int = ROW_CHUNK):
    # keep whole triangles together
    size = max(3, size - size % 3)
    for lo in range(0, n, size):
        yield lo, min(n, lo + size)


@dataclass
class BemOperator:
    """Assembled Galerkin matrix acting on nodal coefficients."""

    mesh: TriMesh | list
    k: float
    eta: float
    M: int
    equation: str
    matrix: np.ndarray = field(repr=False)
    timings: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, phi) -> np.ndarray:
        return self.matrix @ np.asarray(phi, dtype=complex)

    matvec = __call__

    def solve(self, rhs, cfg: KrylovConfig | None = None) -> GMRESResult:
        return gmres(self.matvec, rhs, cfg or KrylovConfig())


def assemble_bw(mesh: TriMesh, k: float, eta: float, M: int = 1, interp: str = "analytic", out=None) -> BemOperator:
    """Galerkin matrix of (v_i, (I/2 + K - i eta S) v_j) in the regularized form.

    ``out`` may be a zeroed (n, n) complex view to assemble into.
    """
    check_order(M)
    t0 = time.perf_counter()
    n = mesh.n_nodes
    A = np.zeros((n, n), dtype=complex) if out is None else out
    exp = interior_expansions(mesh, k, M, interp)
    jets = local_jets(mesh, M)
    W = outer_matrix(mesh)
    V = trace_matrix(mesh)
    src, sw, sm = _source_rule(mesh)
    tgt = gauss_triple(mesh).flat_points
    for lo, hi in _chunks(tgt.shape[0]):
        G, D = kernels.pair_kernels(np.ascontiguousarray(tgt[lo:hi]), src, sm, k)
        coefK, coefS = _moment_coefficients(mesh, exp, k, lo, hi)
        L = _local(mesh, jets, coefK - 1j * eta * coefS, lo, hi) + 0.5 * V[lo:hi]
        X = D - 1j * eta * G * sw[None, :]
        X += L.toarray()
        _accumulate_rows(A, W[lo:hi], X)
    timings = {"total": time.perf_counter() - t0}
    log.info("bem bw: %d nodes, M=%d, %.1fs", n, M, timings["total"])
    return BemOperator(mesh, k, eta, M, "bw", A, timings)


def assemble_bm(mesh: TriMesh, k: float, eta: float, M: int = 1, interp: str = "analytic") -> BemOperator:
    """Galerkin matrix of the Burton-Miller form

    (i eta / 2)(v_i, v_j) - i eta (K v_i, v_j) - (curl v_i, S curl v_j) + k^2 (v_i n, S n v_j)

    with S and K regularized separately.
    """
    check_order(M)
    t0 = time.perf_counter()
    n = mesh.n_nodes
    A = np.asarray((0.5j * eta) * mass_matrix(mesh).toarray(), dtype=complex)
    exp = interior_expansions(mesh, k, M, interp)
    jets = local_jets(mesh, M)
    W = outer_matrix(mesh)
    src, sw, sm = _source_rule(mesh)
    tgt = gauss_triple(mesh).flat_points
    tn = np.repeat(mesh.normal, 3, axis=0)
    curls = surface_curls(mesh)  # (t, j, c)
    # curl of the trial function, gathered onto the nodes by the vertex rule
    Ct, Wc, Cv = [], [], []
    for c in range(3):
        vals = mesh.area[:, None, None] / 3.0 * curls[:, None, :, c]  # (t, node m of K, trial j)
        rows = np.repeat(mesh.tris, 3, axis=1).reshape(-1)
        cols = np.tile(mesh.tris, (1, 3)).reshape(-1)
        Ct.append(sp.csr_matrix((np.broadcast_to(vals, (mesh.n_tris, 3, 3)).reshape(-1), (rows, cols)), shape=(n, n)))
        Cv.append(_sparse_rows(np.broadcast_to(curls[:, None, :, c], (mesh.n_tris, 3, 3)).copy(), mesh))
        Wc.append(_sparse_rows(np.broadcast_to(mesh.area[:, None, None] / 3.0 * curls[:, None, :, c], (mesh.n_tris, 3, 3)).copy(), mesh))
    for lo, hi in _chunks(tgt.shape[0]):
        G, D = kernels.pair_kernels(np.ascontiguousarray(tgt[lo:hi]), src, sm, k)
        coefK, coefS = _moment_coefficients(mesh, exp, k, lo, hi)
        # -i eta (K v_i, v_j): K acts on the test function, so assemble transposed
        Kop = D + _local(mesh, jets, coefK, lo, hi).toarray()
        _accumulate_cols(A, W[lo:hi], -1j * eta * Kop)
        # k^2 (v_i n, S n v_j)
        nm = tn[lo:hi] @ sm.T
        X = (k * k) * (G * nm + _local(mesh, jets, coefS, lo, hi).toarray())
        _accumulate_rows(A, W[lo:hi], X)
        # -(curl v_i, S curl v_j); the interpolant of the piecewise-constant curl is its value on T
        c0 = coefS[:, :1]
        for c in range(3):
            SC = (Ct[c].T @ G.T).T
            SC += Cv[c][lo:hi].multiply(c0).toarray()
            _accumulate_rows(A, Wc[c][lo:hi], -SC)
    timings = {"total": time.perf_counter() - t0}
    log.info("bem bm: %d nodes, M=%d, %.1fs", n, M, timings["total"])
    return BemOperator(mesh, k, eta, M, "bm", A, timings)


def apply_bw_galerkin(mesh: TriMesh, phi, k: float, eta: float, M: int = 1, interp: str = "analytic") -> np.ndarray:
    """I_j = (v_j, (I/2 + K - i eta S) phi_h), regularized, for every node j."""
    if eta == 0:
        raise ValueError("eta must be nonzero")
    return assemble_bw(mesh, k, eta, M, interp)(phi)


def apply_bm_galerkin(mesh: TriMesh, phi, k: float, eta: float, M: int = 1, interp: str = "analytic") -> np.ndarray:
    """(v_j, (i eta / 2 - i eta K' + N) phi_h) through the Maue variational form."""
    if eta == 0:
        raise ValueError("eta must be nonzero")
    return assemble_bm(mesh, k, eta, M, interp)(phi)


# --------------------------------------------------------------------------
# layer potentials and cross-surface blocks
# --------------------------------------------------------------------------
def _potential_rows(mesh: TriMesh, X, k: float, eta: float, M: int, interp: str,
                    reg_radius: float | None, inside_mask=None) -> np.ndarray:
    """Rows R (n_x, n_nodes) with u^s(x) = R @ phi.

    Uses the vertex rule for the plain part (as the Galerkin blocks do).
    """
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    src, sw, sm = _source_rule(mesh)
    G, D = kernels.pair_kernels(X, src, sm, k)
    R = D - 1j * eta * G * sw[None, :]
    R += _regularization(mesh, X, k, eta, M, interp, reg_radius, inside_mask, src, sw, sm).toarray()
    return R


def _regularization(mesh: TriMesh, X, k, eta, M, interp, reg_radius, inside_mask, src, sw, sm) -> sp.csr_matrix:
    """Sparse rows of -sum_t A_t e^{ik d.(x - p*)} [(E0 - E1)(x) + 1_Omega(x)] in terms of the nodal phi."""
    check_order(M)
    n = X.shape[0]
    radius = REG_RADIUS_FACTOR * mesh.h if reg_radius is None else reg_radius
    proj = project_to_mesh(mesh, X)
    sel = np.flatnonzero(proj.distance < radius)
    out = sp.csr_matrix((n, mesh.n_nodes), dtype=complex)
    if sel.size == 0:
        return out
    tri = proj.tri[sel]
    exp = expansions(anchor_jet(mesh, tri, proj.point[sel]), k, M, interp)
    Xs = np.ascontiguousarray(X[sel])
    E = kernels.compute_moments(Xs, np.zeros_like(Xs), exp.directions, src, sw, sm, k, kernels.MOM_BW,
                                kernels.no_skip(sel.size), exp.paired)
    shift = np.exp(1j * k * np.einsum("xti,xi->xt", exp.directions, Xs - exp.anchors))
    ins = inside(mesh, Xs) if inside_mask is None else np.asarray(inside_mask)[sel]
    weight = shift * (E[0] - E[1] + ins[:, None])
    coef = -np.einsum("pat,pt->pa", exp.a + 1j * eta * exp.b, weight)
    # d^alpha phi_h(p*) from the nodal values of the anchor triangle
    _, grads = basis_derivatives(mesh)
    J = np.empty((sel.size, coef.shape[1], 3))
    J[:, 0, :] = proj.bary[sel]
    if M >= 1:
        J[:, 1:, :] = grads[tri]
    vals = np.einsum("pa,paj->pj", coef, J)
    rows = np.repeat(sel, 3)
    cols = mesh.tris[tri].reshape(-1)
    return sp.csr_matrix((vals.reshape(-1), (rows, cols)), shape=(n, mesh.n_nodes))


def evaluate_potential_bem(mesh: TriMesh, phi, X, k: float, eta: float, M: int = 1, interp: str = "analytic",
                           regularize: bool = True, reg_radius: float | None = None, chunk: int = 2048) -> np.ndarray:
    """u^s(x) = D[phi_h] - i eta S[phi_h] at off-surface points.

    The surface integrals use the interior three-point rule. Targets within
    ``reg_radius`` (default REG_RADIUS_FACTOR * h) of the mesh subtract the
    interpolant anchored at the nearest surface point p*, including the
    -1_Omega(x) Phi(x, p*) term.
    """
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)).reshape(-1, 3))
    if X.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    g = gauss_triple(mesh)
    src = np.ascontiguousarray(g.flat_points)
    sw = np.ascontiguousarray(g.flat_weights)
    sm = np.ascontiguousarray(sw[:, None] * np.repeat(mesh.normal, 3, axis=0))
    phig = trace_matrix(mesh) @ phi
    out = np.empty(X.shape[0], dtype=complex)
    for a in range(0, X.shape[0], chunk):
        b = min(X.shape[0], a + chunk)
        G, D = kernels.pair_kernels(X[a:b], src, sm, k)
        out[a:b] = (D - 1j * eta * G * sw[None, :]) @ phig
        if regularize:
            out[a:b] += _regularization(mesh, X[a:b], k, eta, M, interp, reg_radius, None, src, sw, sm) @ phi
    return out


@dataclass
class MultiScatterOperator(BemOperator):
    offsets: tuple = ()


def assemble_multiscatter_bw(meshes, k: float, eta: float, M: int = 1, interp: str = "analytic",
                             reg_radius: float | None = None) -> MultiScatterOperator:
    """Block Galerkin matrix of the BW system posed on the union of closed surfaces.

    Diagonal blocks are the single-surface operators; block (j, i) tests
    with the basis of mesh j the combined potential of the density on
    mesh i, regularized as a layer potential at the interior points of
    mesh j (including the jump term when they lie inside mesh i).
    """
    meshes = list(meshes)
    if len(meshes) < 1:
        raise ValueError("need at least one mesh")
    t0 = time.perf_counter()
    sizes = [m.n_nodes for m in meshes]
    off = np.concatenate([[0], np.cumsum(sizes)])
    A = np.zeros((off[-1], off[-1]), dtype=complex)
    for j, mj in enumerate(meshes):
        sj = slice(off[j], off[j + 1])
        assemble_bw(mj, k, eta, M, interp, out=A[sj, sj])
        W = outer_matrix(mj)
        tgt = gauss_triple(mj).flat_points
        for i, mi in enumerate(meshes):
            if i == j:
                continue
            si = slice(off[i], off[i + 1])
            src, sw, sm = _source_rule(mi)
            ins = inside(mi, tgt)
            blk = A[sj, si]
            for lo, hi in _chunks(tgt.shape[0]):
                R = _potential_rows(mi, tgt[lo:hi], k, eta, M, interp, reg_radius, ins[lo:hi])
                _accumulate_rows(blk, W[lo:hi], R)
    timings = {"total": time.perf_counter() - t0}
    log.info("bem multiscatter: %s nodes, %.1fs", sizes, timings["total"])
    return MultiScatterOperator(meshes, k, eta, M, "bw-multi", A, timings, tuple(int(o) for o in off))


def apply_multiscatter_bw(meshes, phi, k: float, eta: float, M: int = 1, interp: str = "analytic") -> np.ndarray:
    if eta == 0:
        raise ValueError("eta must be nonzero")
    return assemble_multiscatter_bw(meshes, k, eta, M, interp)(phi)


def multiscatter_data(meshes, incident, zero_extend=None) -> np.ndarray:
    """Stacked (v_j, -u_inc) on every mesh; points flagged by ``zero_extend`` get zero data."""
    parts = []
    for m in meshes:
        g = gauss_triple(m).flat_points
        f = -incident.value(g)
        if zero_extend is not None:
            f = np.where(zero_extend(g), 0.0, f)
        parts.append(project_data(m, f))
    return np.concatenate(parts)


def evaluate_multiscatter(meshes, phi, X, k: float, eta: float, M: int = 1, interp: str = "analytic",
                          regularize: bool = True) -> np.ndarray:
    """Sum of the combined potentials of every component density."""
    off = np.concatenate([[0], np.cumsum([m.n_nodes for m in meshes])])
    return sum(
        evaluate_potential_bem(m, phi[off[i] : off[i + 1]], X, k, eta, M, interp, regularize)
        for i, m in enumerate(meshes)
    )


def green_representation(mesh: TriMesh, dirichlet, neumann, X, k: float) -> np.ndarray:
    """D[dirichlet] - S[neumann] for nodal P1 Cauchy data, by the vertex rule."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    src, sw, sm = _source_rule(mesh)
    G, D = kernels.pair_kernels(X, src, sm, k)
    return D @ np.asarray(dirichlet, dtype=complex) - (G * sw[None, :]) @ np.asarray(neumann, dtype=complex)


def neumann_trace(mesh: TriMesh, phi, k: float, eta: float, M: int = 1, interp: str = "analytic") -> np.ndarray:
    """L2-projected Neumann trace of u^s = D[phi] - i eta S[phi] onto P1."""
    moments = apply_bm_galerkin(mesh, phi, k, eta, M, interp)
    return spla.spsolve(mass_matrix(mesh).tocsc(), moments)


def extinction_residual(mesh: TriMesh, phi, dirichlet, X, k: float, eta: float, M: int = 1,
                        interp: str = "analytic") -> np.ndarray:
    """Green representation of the numerical BW solution at interior points X (should vanish)."""
    return green_representation(mesh, dirichlet, neumann_trace(mesh, phi, k, eta, M, interp), X, k)


@dataclass
class BemSolution:
    operator: BemOperator
    density: np.ndarray
    result: GMRESResult


def solve(mesh: TriMesh, data_at_gauss, k: float, eta: float, M: int = 1, equation: str = "bw",
          interp: str = "analytic", cfg: KrylovConfig | None = None) -> BemSolution:
    """Assemble and solve; ``data_at_gauss`` is the boundary data of the scattered
    field at the interior points (Dirichlet trace for bw, Neumann trace for bm)."""
    if equation == "bw":
        op = assemble_bw(mesh, k, eta, M, interp)
    elif equation == "bm":
        op = assemble_bm(mesh, k, eta, M, interp)
    else:
        raise ValueError(f"unknown BEM equation {equation!r}")
    rhs = project_data(mesh, np.asarray(data_at_gauss, dtype=complex))
    res = op.solve(rhs, cfg)
    return BemSolution(op, res.x, res)
