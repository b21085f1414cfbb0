"""Reference fields, evaluation grids, error metric and Nystrom potentials."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from pwdi import kernels
from pwdi.chebyshev import evaluate_jet, tensor_coefficients
from pwdi.geometry import SurfaceGrid, SurfaceJet
from pwdi.kernels import CoincidentPointError, kernel_eval  # noqa: F401  (re-exported)
from pwdi.planewave import ExpansionSet

log = logging.getLogger(__name__)

DEFAULT_SOURCES = (((0.2, 0.1, 0.1), 1.0), ((-0.1, 0.3, -0.1), -1.0))
FAR_RADIUS = 10.0
FAR_SHAPE = (24, 12)  # azimuths x polar angles
NEAR_POINTS_PER_SIDE = 17


# --------------------------------------------------------------------------
# reference fields
# --------------------------------------------------------------------------
class Field:
    """A Helmholtz solution with value and gradient evaluators."""

    def value(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def normal_derivative(self, x, n) -> np.ndarray:
        return np.einsum("...i,...i->...", self.gradient(x), np.asarray(n, dtype=float))

    def __call__(self, x) -> np.ndarray:
        return self.value(x)


@dataclass(frozen=True)
class PointSources(Field):
    """u(x) = sum_i w_i exp(i k |x - x_i|) / |x - x_i| (no 1/(4 pi) factor)."""

    k: float
    positions: np.ndarray
    weights: np.ndarray

    def _parts(self, x):
        x = np.asarray(x, dtype=float)
        R = x[..., None, :] - self.positions
        r = np.linalg.norm(R, axis=-1)
        if np.any(r == 0):
            raise CoincidentPointError("evaluation at a source point")
        return R, r

    def value(self, x):
        _, r = self._parts(x)
        return np.sum(self.weights * np.exp(1j * self.k * r) / r, axis=-1)

    def gradient(self, x):
        R, r = self._parts(x)
        f = self.weights * np.exp(1j * self.k * r) * (1j * self.k * r - 1) / r**3
        return np.sum(f[..., None] * R, axis=-2)


@dataclass(frozen=True)
class PlaneWave(Field):
    """u(x) = exp(i k d . x)."""

    k: float
    direction: np.ndarray

    def value(self, x):
        return np.exp(1j * self.k * np.asarray(x, dtype=float) @ self.direction)

    def gradient(self, x):
        return 1j * self.k * self.value(x)[..., None] * self.direction


def exact_interior_sources(k: float, sources=DEFAULT_SOURCES) -> PointSources:
    pos = np.array([s[0] for s in sources], dtype=float)
    w = np.array([s[1] for s in sources], dtype=float)
    return PointSources(k, pos, w)


def planewave_incident(k: float, d) -> PlaneWave:
    d = np.asarray(d, dtype=float)
    if abs(np.linalg.norm(d) - 1) > 1e-12:
        raise ValueError("planewave direction must be a unit vector")
    return PlaneWave(k, d)


# --------------------------------------------------------------------------
# evaluation grids and error
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class EvalGrid:
    points: np.ndarray
    role: str

    @property
    def size(self) -> int:
        return self.points.shape[0]


def far_grid(radius: float = FAR_RADIUS, shape=FAR_SHAPE) -> EvalGrid:
    """Azimuth/polar lattice on the sphere |x| = radius (midpoint polar angles)."""
    nt, npol = shape
    th = 2 * np.pi * np.arange(nt) / nt
    ph = np.pi * (np.arange(npol) + 0.5) / npol
    T, P = np.meshgrid(th, ph, indexing="ij")
    pts = radius * np.stack([np.cos(T) * np.sin(P), np.sin(T) * np.sin(P), np.cos(P)], axis=-1).reshape(-1, 3)
    return EvalGrid(pts, "far")


def near_cube_grid(half_side: float = 1.0, n: int = NEAR_POINTS_PER_SIDE) -> EvalGrid:
    """n x n points on each face of the cube [-h, h]^3 (edges repeated per face)."""
    from pwdi.geometry import CUBE_FACES

    s = np.linspace(-1, 1, n)
    U, V = np.meshgrid(s, s, indexing="ij")
    pts = []
    for axis, u, v in CUBE_FACES:
        pts.append(half_side * (axis + U.ravel()[:, None] * u + V.ravel()[:, None] * v))
    return EvalGrid(np.concatenate(pts), "near")


def relative_max_error(grid, numeric, exact) -> float:
    """max |numeric - exact| / max |exact| over the grid."""
    numeric = np.asarray(numeric)
    exact = np.asarray(exact)
    if exact.size == 0:
        raise ValueError("empty evaluation grid")
    ref = np.max(np.abs(exact))
    if ref == 0:
        raise ZeroDivisionError("reference field vanishes on the grid")
    return float(np.max(np.abs(numeric - exact)) / ref)


# --------------------------------------------------------------------------
# Nystrom potential evaluation
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class Projection:
    patch: np.ndarray  # (X,)
    xi: np.ndarray  # (X, 2)
    jet: SurfaceJet  # leading shape (X,)
    distance: np.ndarray  # (X,)

    @property
    def point(self) -> np.ndarray:
        return self.jet.point


def _newton(patch, X, xi, iters=8):
    for _ in range(iters):
        jet = patch.jet(xi[:, 0], xi[:, 1])
        diff = jet.point - X
        e1, e2 = jet.e1, jet.e2
        g = np.stack([np.sum(diff * e1, -1), np.sum(diff * e2, -1)], -1)
        H = np.empty((xi.shape[0], 2, 2))
        H[:, 0, 0] = np.sum(e1 * e1, -1) + np.sum(diff * jet.dx[:, 3], -1)
        H[:, 0, 1] = H[:, 1, 0] = np.sum(e1 * e2, -1) + np.sum(diff * jet.dx[:, 4], -1)
        H[:, 1, 1] = np.sum(e2 * e2, -1) + np.sum(diff * jet.dx[:, 5], -1)
        # fall back to the Gauss-Newton matrix where the Hessian is not positive
        det = H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] ** 2
        bad = (det <= 0) | (H[:, 0, 0] <= 0)
        H[bad, 0, 0] = np.sum(e1 * e1, -1)[bad]
        H[bad, 0, 1] = H[bad, 1, 0] = np.sum(e1 * e2, -1)[bad]
        H[bad, 1, 1] = np.sum(e2 * e2, -1)[bad]
        step = np.linalg.solve(H, g[..., None])[..., 0]
        xi = np.clip(xi - step, -1.0, 1.0)
        if np.max(np.abs(step)) < 1e-14:
            break
    jet = patch.jet(xi[:, 0], xi[:, 1])
    return xi, jet, np.linalg.norm(jet.point - X, axis=-1)


def project_to_surface(grid: SurfaceGrid, X, candidates: int = 4) -> Projection:
    """Nearest surface point: nearest nodes, then Newton on their charts."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    nX = X.shape[0]
    kq = min(candidates, grid.size)
    _, idx = cKDTree(grid.points).query(X, k=kq)
    idx = idx.reshape(nX, kq)
    best_d = np.full(nX, np.inf)
    best_xi = np.zeros((nX, 2))
    best_patch = np.zeros(nX, dtype=int)
    for c in range(kq):
        nodes = idx[:, c]
        pids = grid.patch_index[nodes]
        for b in np.unique(pids):
            sel = np.nonzero(pids == b)[0]
            xi, _, dist = _newton(grid.patches[b], X[sel], grid.xi[nodes[sel]].copy())
            better = dist < best_d[sel] - 1e-15
            best_d[sel[better]] = dist[better]
            best_xi[sel[better]] = xi[better]
            best_patch[sel[better]] = b
    dx = np.zeros((nX, 15, 3))
    dn = np.zeros((nX, 10, 3))
    for b in np.unique(best_patch):
        sel = best_patch == b
        j = grid.patches[b].jet(best_xi[sel, 0], best_xi[sel, 1])
        dx[sel], dn[sel] = j.dx, j.dn
    return Projection(best_patch, best_xi, SurfaceJet(dx, dn), best_d)


def density_jet_at(grid: SurfaceGrid, phi, proj: Projection, M: int) -> np.ndarray:
    """Chart derivatives of the Chebyshev interpolant of phi at projected points, (X, n_alpha)."""
    coeffs = tensor_coefficients(grid.as_patch_arrays(np.asarray(phi)))
    out = np.zeros((proj.patch.shape[0], (M + 1) * (M + 2) // 2), dtype=complex)
    for b in np.unique(proj.patch):
        sel = proj.patch == b
        out[sel] = evaluate_jet(coeffs[b], proj.xi[sel, 0], proj.xi[sel, 1], M).T
    return out


def inside_smooth(proj: Projection, X, rtol: float = 1e-12) -> np.ndarray:
    """Interior indicator from the side of the nearest point; on-surface points are exterior."""
    X = np.atleast_2d(X)
    s = np.einsum("xi,xi->x", X - proj.point, proj.jet.normal)
    return (s < 0) & (proj.distance > rtol * np.max(np.abs(X), initial=1.0))


def plain_potential(grid: SurfaceGrid, phi, X, k: float, eta: float, chunk: int = 2048) -> np.ndarray:
    """Direct quadrature of D[phi] - i eta S[phi] at off-surface points."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    src = np.ascontiguousarray(grid.points)
    sw = np.ascontiguousarray(grid.weights)
    sm = np.ascontiguousarray(grid.weights[:, None] * grid.normals)
    coef = np.zeros(5, dtype=complex)
    coef[kernels.SLOT_D] = 1.0
    coef[kernels.SLOT_S] = -1j * eta
    out = np.empty(X.shape[0], dtype=complex)
    for a in range(0, X.shape[0], chunk):
        b = min(X.shape[0], a + chunk)
        K = kernels.dense_kernel(X[a:b], np.zeros_like(X[a:b]), src, sw, sm, k, coef, kernels.no_skip(b - a))
        out[a:b] = K @ phi
    return out


def green_representation(grid: SurfaceGrid, dirichlet, neumann, X, k: float) -> np.ndarray:
    """D[dirichlet] - S[neumann] at points X by plain quadrature.

    For the Cauchy data of a radiating exterior solution this reproduces the
    field outside and vanishes inside the obstacle (extinction).
    """
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    src, sw, sm = kernels_sources(grid)
    out = np.zeros(X.shape[0], dtype=complex)
    for slot, dens, sign in ((kernels.SLOT_D, dirichlet, 1.0), (kernels.SLOT_S, neumann, -1.0)):
        coef = np.zeros(5, dtype=complex)
        coef[slot] = sign
        K = kernels.dense_kernel(X, np.zeros_like(X), src, sw, sm, k, coef, kernels.no_skip(X.shape[0]))
        out += K @ np.asarray(dens, dtype=complex)
    return out


def kernels_sources(grid: SurfaceGrid):
    """Contiguous (points, weights, weighted normals) of a surface grid."""
    return (np.ascontiguousarray(grid.points), np.ascontiguousarray(grid.weights),
            np.ascontiguousarray(grid.weights[:, None] * grid.normals))


def extinction_residual(grid: SurfaceGrid, phi, dirichlet, X, k: float, eta: float, M: int = 3,
                        interp: str = "algebraic") -> np.ndarray:
    """Green representation of the numerical BW solution at interior points X.

    The Neumann trace of u^s = D[phi] - i eta S[phi] is recovered with the
    regularized BM operator of order M (at least 2); the result should
    vanish up to discretization error.
    """
    from pwdi.nystrom import apply_bm

    neumann = apply_bm(grid, phi, k, eta, max(M, 2), "direct", interp)
    return green_representation(grid, dirichlet, neumann, X, k)


def regularized_potential(grid: SurfaceGrid, phi, X, exp: ExpansionSet, amplitudes, inside, k: float, eta: float):
    """Combined potential with the kernel-regularizing interpolant subtracted.

    ``exp`` holds the expansion directions anchored at p*(x) and
    ``amplitudes`` (X, T) the interpolant Phi(., p*).
    """
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    phi = np.asarray(phi, dtype=complex)
    plain = plain_potential(grid, phi, X, k, eta)
    src = np.ascontiguousarray(grid.points)
    sw = np.ascontiguousarray(grid.weights)
    sm = np.ascontiguousarray(grid.weights[:, None] * grid.normals)
    E = kernels.compute_moments(X, np.zeros_like(X), exp.directions, src, sw, sm, k, kernels.MOM_BW,
                                kernels.no_skip(X.shape[0]), exp.paired)
    # moments are relative to exp(i k d.(q - x)); shift the anchor to p*
    shift = np.exp(1j * k * np.einsum("xti,xi->xt", exp.directions, X - exp.anchors))
    corr = np.sum(amplitudes * shift * (E[0] - E[1]), axis=-1)
    Phi_x = np.sum(amplitudes * shift, axis=-1)
    return plain - corr - np.where(inside, Phi_x, 0.0)


def evaluate_potential_nystrom(grid: SurfaceGrid, phi, X, k: float, eta: float, M: int, interp: str = "algebraic",
                               regularize: bool = True) -> np.ndarray:
    """Scattered field u^s = D[phi] - i eta S[phi] at points X.

    With ``regularize`` the planewave interpolant anchored at the nearest
    surface point removes the near-singular behaviour of the integrand.
    """
    from pwdi.nystrom import expansions

    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    if not regularize:
        return plain_potential(grid, phi, X, k, eta)
    proj = project_to_surface(grid, X)
    exp = expansions(proj.jet, k, M, interp)
    dj = density_jet_at(grid, phi, proj, M)
    amps = exp.amplitudes(dj, eta)
    inside = inside_smooth(proj, X)
    return regularized_potential(grid, phi, X, exp, amps, inside, k, eta)
