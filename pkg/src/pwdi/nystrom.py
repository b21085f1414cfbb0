"""Chebyshev-patch Nystrom discretization of the regularized BW and BM operators.

Every operator is assembled as a dense matrix. The kernel-regularization
acts through the density jet at the target node, so the planewave
corrections only touch the diagonal (same-patch) blocks:

    A phi(p) = sum_{q != p} w_q K(p, q) phi(q)
               - sum_alpha d^alpha phi(p) [R_alpha(p) + c_alpha(p) / 2] + (jump) phi(p)

where R_alpha gathers the kernel moments of the expansion functions and
c_alpha their traces at p.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from pwdi import kernels
from pwdi.algebraic import algebraic_expansions
from pwdi.analytic import analytic_expansions
from pwdi.chebyshev import differentiation_matrix, spectral_derivatives
from pwdi.geometry import SurfaceGrid, SurfaceJet, first_fundamental_form
from pwdi.linsolve import GMRESResult, KrylovConfig, gmres
from pwdi.planewave import ExpansionSet
from pwdi.taylor import multi_indices

log = logging.getLogger(__name__)

EQUATIONS = ("bw", "bm-direct", "bm-regularized")
INTERPOLANTS = ("analytic", "algebraic")
ROW_CHUNK = 1024


class OrderTooLowError(ValueError):
    """The requested interpolation order leaves the integrand unbounded."""


def check_setup(equation: str, M: int, interp: str) -> None:
    if equation not in EQUATIONS:
        raise ValueError(f"unknown equation {equation!r}")
    if interp not in INTERPOLANTS:
        raise ValueError(f"unknown interpolant {interp!r}")
    if interp == "analytic" and M not in (0, 1):
        raise ValueError(f"analytic interpolant supports M in {{0, 1}}, got {M}")
    if interp == "algebraic" and M not in (0, 1, 2, 3):
        raise ValueError(f"algebraic interpolant supports M in {{0, 1, 2, 3}}, got {M}")
    if equation.startswith("bm") and M < 2:
        raise OrderTooLowError(f"{equation} needs M >= 2 for bounded integrands, got M={M}")


def expansions(jet: SurfaceJet, k: float, M: int, interp: str) -> ExpansionSet:
    """Expansion functions at every point of ``jet`` for the chosen interpolant."""
    if interp == "analytic":
        return analytic_expansions(jet, k, M)
    if interp == "algebraic":
        return algebraic_expansions(jet, k, M)
    raise ValueError(f"unknown interpolant {interp!r}")


def contravariant_basis(jet: SurfaceJet):
    """Dual tangent vectors e^1, e^2 with e^i . e_j = delta_ij."""
    g11, g12, g22, g = first_fundamental_form(jet)
    e1, e2 = jet.e1, jet.e2
    up1 = (g22[..., None] * e1 - g12[..., None] * e2) / g[..., None]
    up2 = (-g12[..., None] * e1 + g11[..., None] * e2) / g[..., None]
    return up1, up2


def derivative_blocks(N: int, M: int) -> list[np.ndarray]:
    """Per-patch matrices (N^2, N^2) of d^alpha for |alpha| <= M, graded order."""
    D = [np.eye(N)] + [differentiation_matrix(N, m) for m in range(1, M + 1)]
    return [np.kron(D[a1], D[a2]) for a1, a2 in multi_indices(M)]


def density_jet(grid: SurfaceGrid, phi: np.ndarray, M: int) -> np.ndarray:
    """Spectral chart derivatives d^alpha phi at every node, shape (n_nodes, n_alpha)."""
    vals = grid.as_patch_arrays(np.asarray(phi))
    d = spectral_derivatives(vals, M)  # (n_alpha, n_patches, N, N)
    return d.reshape(d.shape[0], -1).T


def _source_arrays(grid: SurfaceGrid):
    src = np.ascontiguousarray(grid.points)
    sw = np.ascontiguousarray(grid.weights)
    sm = np.ascontiguousarray(grid.weights[:, None] * grid.normals)
    return src, sw, sm


def _dense_coefs(equation: str, k: float, eta: float) -> np.ndarray:
    c = np.zeros(5, dtype=np.complex128)
    if equation == "bw":
        c[kernels.SLOT_D] = 1.0
        c[kernels.SLOT_S] = -1j * eta
    elif equation == "bm-direct":
        c[kernels.SLOT_N] = 1.0
        c[kernels.SLOT_KP] = -1j * eta
    else:
        c[kernels.SLOT_NN] = k * k
        c[kernels.SLOT_KP] = -1j * eta
    return c


def _moment_kind(equation: str) -> int:
    return {"bw": kernels.MOM_BW, "bm-direct": kernels.MOM_BM, "bm-regularized": kernels.MOM_MAUE}[equation]


def correction_coefficients(exp: ExpansionSet, E: np.ndarray, equation: str, eta: float, normals: np.ndarray):
    """Per-node weights of d^alpha phi(p) in the regularized operator, (P, n_alpha).

    Combines the kernel moments ``E`` (2, P, T) with the trace of the
    expansion functions at p (the half-jump term).
    """
    A = exp.a + 1j * eta * exp.b  # (P, n_alpha, T)
    R = np.einsum("pat,pt->pa", A, E[0] - E[1])
    if equation == "bw":
        trace = A.sum(axis=-1)
    else:
        dn = 1j * exp.k * np.einsum("pti,pi->pt", exp.directions, normals)
        trace = np.einsum("pat,pt->pa", A, dn)
    return -R - 0.5 * trace


@dataclass
class NystromOperator:
    """Assembled regularized combined-field operator on a Chebyshev surface grid."""

    grid: SurfaceGrid
    k: float
    eta: float
    M: int
    equation: str
    interp: str
    matrix: np.ndarray = field(repr=False)
    timings: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.grid.size

    def __call__(self, phi: np.ndarray) -> np.ndarray:
        return self.matrix @ phi

    matvec = __call__

    def solve(self, rhs: np.ndarray, cfg: KrylovConfig | None = None) -> GMRESResult:
        return gmres(self.matvec, rhs, cfg or KrylovConfig())


def assemble(grid: SurfaceGrid, k: float, eta: float, M: int, equation: str = "bw", interp: str = "algebraic") -> NystromOperator:
    """Dense matrix of the regularized BW or BM operator."""
    check_setup(equation, M, interp)
    t0 = time.perf_counter()
    P = grid.size
    tgt = np.ascontiguousarray(grid.points)
    tn = np.ascontiguousarray(grid.normals)
    src, sw, sm = _source_arrays(grid)
    skip = np.arange(P, dtype=np.int64)
    timings = {}

    exp = expansions(grid.jet, k, M, interp)
    timings["interpolant"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    A = kernels.dense_kernel(tgt, tn, src, sw, sm, k, _dense_coefs(equation, k, eta), skip)
    if equation == "bm-regularized":
        _add_curl_terms(A, grid, k, skip)
    timings["kernel"] = time.perf_counter() - t1

    t1 = time.perf_counter()
    E = kernels.compute_moments(tgt, tn, exp.directions, src, sw, sm, k, _moment_kind(equation), skip, exp.paired)
    coef = correction_coefficients(exp, E, equation, eta, tn)
    timings["moments"] = time.perf_counter() - t1

    jump = 0.5 if equation == "bw" else 0.5j * eta
    A[np.diag_indices(P)] += jump
    n2 = grid.N**2
    blocks = derivative_blocks(grid.N, M)
    for b in range(grid.n_patches):
        s = slice(b * n2, (b + 1) * n2)
        for ia, Db in enumerate(blocks):
            A[s, s] += coef[s, ia][:, None] * Db
    timings["total"] = time.perf_counter() - t0
    log.info("assembled %s N=%d M=%d (%s): %s", equation, grid.N, M, interp, {k_: round(v, 2) for k_, v in timings.items()})
    return NystromOperator(grid, k, eta, M, equation, interp, A, timings)


def _add_curl_terms(A: np.ndarray, grid: SurfaceGrid, k: float, skip: np.ndarray) -> None:
    """Add the surface-curl pairing sum_i B_i d_i, with d_i spectral per patch."""
    N = grid.N
    n2 = N * N
    D = differentiation_matrix(N, 1)
    tgt = np.ascontiguousarray(grid.points)
    tn = np.ascontiguousarray(grid.normals)
    src, sw, _ = _source_arrays(grid)
    up1, up2 = contravariant_basis(grid.jet)
    up1 = np.ascontiguousarray(up1)
    up2 = np.ascontiguousarray(up2)
    P = grid.size
    for r0 in range(0, P, ROW_CHUNK):
        r1 = min(P, r0 + ROW_CHUNK)
        B = kernels.curl_kernel(tgt[r0:r1], tn[r0:r1], src, tn, sw, up1, up2, k, skip[r0:r1])
        for b in range(grid.n_patches):
            s = slice(b * n2, (b + 1) * n2)
            B1 = B[0][:, s].reshape(-1, N, N)
            B2 = B[1][:, s].reshape(-1, N, N)
            blk = np.einsum("rij,ik->rkj", B1, D) + np.einsum("rij,jk->rik", B2, D)
            A[r0:r1, s] += blk.reshape(-1, n2)


def apply_bw(grid: SurfaceGrid, phi, k: float, eta: float, M: int, interp: str = "algebraic") -> np.ndarray:
    """(I/2 + K - i eta S) phi through the regularized form."""
    return assemble(grid, k, eta, M, "bw", interp)(np.asarray(phi, dtype=complex))


def apply_bm(grid: SurfaceGrid, phi, k: float, eta: float, M: int, variant: str = "direct", interp: str = "algebraic") -> np.ndarray:
    """(i eta / 2) phi - i eta K' phi + N phi through the regularized form.

    ``variant`` is ``direct`` (hypersingular kernel) or ``regularized``
    (Maue surface-curl form).
    """
    if variant not in ("direct", "regularized"):
        raise ValueError(f"unknown BM variant {variant!r}")
    return assemble(grid, k, eta, M, f"bm-{variant}", interp)(np.asarray(phi, dtype=complex))


def bw_integrand(grid: SurfaceGrid, phi, p_index: int, Phi, k: float, eta: float) -> np.ndarray:
    """Regularized BW integrand at every source node for the target node ``p_index``.

    ``Phi`` is any object with ``evaluate`` and ``evaluate_normal`` for a
    single anchor (a batch-1 :class:`PlanewaveInterpolant` or a callable
    pair); the target node itself contributes zero.
    """
    phi = np.asarray(phi, dtype=complex)
    p = grid.points[p_index]
    q = grid.points
    nq = grid.normals
    mask = np.arange(grid.size) != p_index
    val = Phi.evaluate(q[None])[0]
    dn = Phi.evaluate_normal(q[None], nq[None])[0]
    out = np.zeros(grid.size, dtype=complex)
    kv = kernels.kernel_eval(k, p[None], q[mask], ny=nq[mask])
    out[mask] = kv["dG_dny"] * (phi[mask] - val[mask]) - kv["G"] * (1j * eta * phi[mask] - dn[mask])
    return out


@dataclass
class NystromSolution:
    operator: NystromOperator
    density: np.ndarray
    result: GMRESResult


def solve(grid: SurfaceGrid, data: np.ndarray, k: float, eta: float, M: int, equation: str = "bw",
          interp: str = "algebraic", cfg: KrylovConfig | None = None) -> NystromSolution:
    """Assemble and solve with boundary data ``data`` (Dirichlet trace for BW,
    Neumann trace for BM, of the scattered field)."""
    op = assemble(grid, k, eta, M, equation, interp)
    res = op.solve(np.asarray(data, dtype=complex), cfg)
    return NystromSolution(op, res.x, res)
