"""Algebraic planewave interpolant of order M <= 3.

The expansion functions are least-norm combinations of planewaves
w_l(x, p) = exp(i k d_l . (x - p)) over a fixed spherical direction grid.
Their coefficients solve C(p) a_j = delta_j and C(p) b_j = delta_{j+N/2},
where the rows of C(p) are the chart derivatives of w_l and of its normal
derivative at p.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from pwdi.geometry import SurfaceJet
from pwdi.planewave import ExpansionSet, PlanewaveInterpolant, check_order
from pwdi.taylor import multi_indices, n_terms

log = logging.getLogger(__name__)

GRID_SHAPES = {0: (2, 2), 1: (4, 3), 2: (5, 4), 3: (6, 5)}
# Even azimuth counts make C(p) singular on symmetry planes of the lattice
# (order 0: every direction lies in the y-z plane; order 1: d.n vanishes in
# pairs at n ~ (1, -1, 0)), and with six azimuths e^{+-4i theta} aliases onto
# e^{-+2i theta} so the order-3 system loses rank everywhere. The solvers use
# odd azimuth counts, which keep C(p) uniformly conditioned on the sphere.
SOLVER_SHAPES = {0: (3, 2), 1: (5, 3), 2: (5, 4), 3: (7, 5)}
PINV_RTOL = 1e-8
RCOND_MIN = 1e-13

# graded multi-index ordering of the point conditions, (0,0) -> row 0
ORDERING = tuple(multi_indices(3))


class RankDeficiencyError(np.linalg.LinAlgError):
    """The point-condition matrix cannot be inverted to the required accuracy."""


@dataclass(frozen=True)
class DirectionGrid:
    M: int
    shape: tuple[int, int]
    directions: np.ndarray  # (L, 3)

    @property
    def L(self) -> int:
        return self.directions.shape[0]


def direction_grid(M: int, shape: tuple[int, int] | None = None) -> DirectionGrid:
    """Uniform (theta, phi) lattice of unit directions for order M.

    The default lattice sizes are ``GRID_SHAPES``; pass ``shape`` to
    override (the solvers use ``SOLVER_SHAPES``).
    """
    check_order(M, GRID_SHAPES.keys())
    Lt, Lp = shape or GRID_SHAPES[M]
    if Lt * Lp < (M + 1) * (M + 2):
        raise ValueError(f"{Lt}x{Lp} directions cannot match order {M}")
    theta = 2 * np.pi * (np.arange(1, Lt + 1) - 0.5) / Lt
    phi = np.pi * (np.arange(1, Lp + 1) - 0.5) / Lp
    T, P = np.meshgrid(theta, phi, indexing="ij")
    T, P = T.ravel(), P.ravel()
    d = np.stack([np.cos(T) * np.sin(P), np.sin(T) * np.sin(P), np.cos(P)], axis=-1)
    return DirectionGrid(M, (Lt, Lp), d)


def build_C(p_jet: SurfaceJet, dirs, k: float, M: int) -> np.ndarray:
    """Point-condition matrices C(p), shape S + (N, L) with N = (M+1)(M+2).

    Rows 0..N/2-1 hold d^alpha w_l(p, p), the remaining rows
    d^alpha w_{n,l}(p, p), both in graded multi-index order.
    """
    check_order(M, GRID_SHAPES.keys())
    d = dirs.directions if isinstance(dirs, DirectionGrid) else np.asarray(dirs, dtype=float)
    nh = n_terms(M)
    ik = 1j * k
    # i k d . d^alpha x and i k d . d^alpha n, shape S + (terms, L)
    tx = ik * np.einsum("...ai,li->...al", p_jet.dx[..., :10, :], d)
    tn = ik * np.einsum("...ai,li->...al", p_jet.dn[..., :10, :], d)
    c = [None] * 21  # 1-based like the usual tables
    c[1] = np.ones_like(tx[..., 0, :])
    c[11] = tn[..., 0, :]
    if M >= 1:
        c[2], c[3] = tx[..., 1, :], tx[..., 2, :]
        c[12] = tn[..., 1, :] + c[2] * c[11]
        c[13] = tn[..., 2, :] + c[3] * c[11]
    if M >= 2:
        c[4] = tx[..., 3, :] + c[2] ** 2
        c[5] = tx[..., 4, :] + c[2] * c[3]
        c[6] = tx[..., 5, :] + c[3] ** 2
        c[14] = tn[..., 3, :] + 2 * c[2] * (c[12] - c[2] * c[11]) + c[4] * c[11]
        c[15] = tn[..., 4, :] - 2 * c[2] * c[3] * c[11] + c[3] * c[12] + c[2] * c[13] + c[5] * c[11]
        c[16] = tn[..., 5, :] + 2 * c[3] * (c[13] - c[3] * c[11]) + c[6] * c[11]
    if M >= 3:
        c[7] = tx[..., 6, :] + 3 * c[2] * c[4] - 2 * c[2] ** 3
        c[8] = tx[..., 7, :] + 2 * c[2] * (c[5] - c[2] * c[3]) + c[3] * c[4]
        c[9] = tx[..., 8, :] + 2 * c[3] * (c[5] - c[2] * c[3]) + c[2] * c[6]
        c[10] = tx[..., 9, :] + 3 * c[3] * c[6] - 2 * c[3] ** 3
        c[17] = (
            tn[..., 6, :]
            + 3 * (c[2] * c[14] + c[4] * c[12])
            + 6 * c[2] * (c[2] ** 2 * c[11] - c[2] * c[12] - c[4] * c[11])
            + c[7] * c[11]
        )
        c[18] = (
            tn[..., 7, :]
            + 6 * c[2] ** 2 * c[3] * c[11]
            - 4 * c[2] * (c[3] * c[12] + c[5] * c[11])
            + 2 * (c[2] * (c[15] - c[2] * c[13]) + c[5] * c[12] - c[3] * c[4] * c[11])
            + c[3] * c[14]
            + c[4] * c[13]
            + c[8] * c[11]
        )
        c[19] = (
            tn[..., 8, :]
            + 6 * c[2] * c[3] ** 2 * c[11]
            - 4 * c[3] * (c[2] * c[13] + c[5] * c[11])
            + 2 * (c[3] * (c[15] - c[3] * c[12]) + c[5] * c[13] - c[2] * c[6] * c[11])
            + c[2] * c[16]
            + c[6] * c[12]
            + c[9] * c[11]
        )
        c[20] = (
            tn[..., 9, :]
            + 3 * (c[3] * c[16] + c[6] * c[13])
            + 6 * c[3] * (c[3] ** 2 * c[11] - c[3] * c[13] - c[6] * c[11])
            + c[10] * c[11]
        )
    rows = [c[1 + i] for i in range(nh)] + [c[11 + i] for i in range(nh)]
    return np.stack(rows, axis=-2)


def solve_coefficients(C: np.ndarray):
    """Least-norm solutions C^dagger = C^* (C C^*)^{-1} for a batch of C (P, N, L).

    Returns (a, b), each (P, N/2, L): a[:, j] solves C a = delta_j and
    b[:, j] solves C b = delta_{j + N/2}.

    C^dagger is formed from a QR factorization C^* = Q R (so that
    C^dagger = Q R^{-*}) after row equilibration, which avoids squaring the
    condition number of C in the Gram matrix C C^*.
    """
    C = np.asarray(C)
    single = C.ndim == 2
    if single:
        C = C[None]
    P, N, L = C.shape
    if L < N:
        raise RankDeficiencyError(f"{L} directions cannot match {N} conditions")
    scale = 1.0 / np.linalg.norm(C, axis=-1)
    Cs = C * scale[..., None]
    Q, R = np.linalg.qr(np.conj(np.swapaxes(Cs, -1, -2)))  # (P, L, N), (P, N, N)
    diag = np.abs(np.diagonal(R, axis1=-2, axis2=-1))
    rcond = diag.min(axis=-1) / diag.max(axis=-1)
    if np.any(rcond < RCOND_MIN):
        i = int(np.argmin(rcond))
        raise RankDeficiencyError(f"point-condition matrix numerically singular at point {i} (rcond {rcond[i]:.1e})")
    eye = np.broadcast_to(np.eye(N), (P, N, N))
    # C^dagger = Q R^{-*}: solve R^* Y = I
    Y = np.linalg.solve(np.conj(np.swapaxes(R, -1, -2)), eye)
    Cdag = (Q @ Y) * scale[:, None, :]
    res = np.abs(C @ Cdag - eye).max(axis=(-2, -1))
    if np.any(res > PINV_RTOL):
        i = int(np.argmax(res))
        raise RankDeficiencyError(f"pseudoinverse residual {res[i]:.3e} at point {i} exceeds {PINV_RTOL:g}")
    a = np.swapaxes(Cdag[:, :, : N // 2], -1, -2)
    b = np.swapaxes(Cdag[:, :, N // 2 :], -1, -2)
    if single:
        return a[0], b[0]
    return a, b


def algebraic_expansions(jet: SurfaceJet, k: float, M: int, grid: DirectionGrid | None = None) -> ExpansionSet:
    """Expansion functions at every point of ``jet`` over a shared direction grid."""
    grid = grid or direction_grid(M, SOLVER_SHAPES[M])
    jet = jet.flat()
    P = jet.dx.shape[0]
    a, b = solve_coefficients(build_C(jet, grid, k, M))
    dirs = np.broadcast_to(grid.directions, (P,) + grid.directions.shape)
    return ExpansionSet(jet.point.copy(), dirs, a, b, k, M, "algebraic")


def build_algebraic(p_jet: SurfaceJet, density_jet, k: float, eta: float, M: int, family: str = "combined") -> PlanewaveInterpolant:
    """Algebraic interpolant of order M anchored at the point(s) of ``p_jet``."""
    exp = algebraic_expansions(p_jet, k, M)
    dj = np.atleast_2d(np.asarray(density_jet))
    return exp.interpolant(dj[:, : exp.a.shape[1]], eta, family)


def separable_coefficients(interp: PlanewaveInterpolant) -> np.ndarray:
    """phi_l(p) with Phi(x, p) = sum_l phi_l(p) conj(w_l(p)) W_l(x).

    Here W_l(x) = exp(i k d_l . x) and w_l(p) = exp(i k d_l . p), so the
    coefficients are the combined planewave amplitudes.
    """
    d = interp.directions
    if not np.allclose(d, d[:1]):
        raise ValueError("separable form needs anchor-independent directions")
    return interp.separable_coefficients()
