"""Parametric surface patches, surface jets and Chebyshev surface grids.

Every closed smooth surface is a union of six charts over [-1, 1]^2.
Chart jets (derivatives of the coordinate map and of the unit normal)
are exact: charts are written against :class:`pwdi.taylor.TSeries`, so
the same code yields point values and all partial derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from pwdi.taylor import TSeries, cross, dot, multi_indices, n_terms, sqrt

# jets carry d^alpha x for |alpha| <= 4 and d^alpha n for |alpha| <= 3
X_ORDER = 4
N_ORDER = 3
METRIC_RTOL = 1e-14

Chart = Callable[[TSeries, TSeries], tuple]


class DegenerateMetricError(ValueError):
    """Raised when the first fundamental form is (numerically) singular."""


@dataclass(frozen=True)
class SurfaceJet:
    """Differential data at a batch of surface points.

    Arrays share an arbitrary leading shape ``S``.

    Attributes
    ----------
    dx : ndarray, shape S + (15, 3)
        d^alpha x for |alpha| <= 4 in graded multi-index order; ``dx[..., 0, :]``
        is the point itself.
    dn : ndarray, shape S + (10, 3)
        d^alpha n for |alpha| <= 3; ``dn[..., 0, :]`` is the unit normal.
    """

    dx: np.ndarray
    dn: np.ndarray

    @property
    def point(self) -> np.ndarray:
        return self.dx[..., 0, :]

    @property
    def normal(self) -> np.ndarray:
        return self.dn[..., 0, :]

    @property
    def e1(self) -> np.ndarray:
        return self.dx[..., 1, :]

    @property
    def e2(self) -> np.ndarray:
        return self.dx[..., 2, :]

    @property
    def shape(self) -> tuple:
        return self.dx.shape[:-2]

    def __getitem__(self, item) -> "SurfaceJet":
        return SurfaceJet(self.dx[item], self.dn[item])

    def flat(self) -> "SurfaceJet":
        """Same data with the leading shape collapsed to one batch axis."""
        return SurfaceJet(self.dx.reshape(-1, *self.dx.shape[-2:]), self.dn.reshape(-1, *self.dn.shape[-2:]))

    @classmethod
    def planar(cls, point, e1, e2) -> "SurfaceJet":
        """Jet of the affine chart x = p + xi1 e1 + xi2 e2 (triangle frames)."""
        point = np.asarray(point, dtype=float)
        dx = np.zeros(point.shape[:-1] + (15, 3))
        dn = np.zeros(point.shape[:-1] + (10, 3))
        dx[..., 0, :] = point
        dx[..., 1, :] = e1
        dx[..., 2, :] = e2
        n = np.cross(e1, e2)
        dn[..., 0, :] = n / np.linalg.norm(n, axis=-1, keepdims=True)
        return cls(dx, dn)

    def tangents(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit contravariant tangents tau1 = sqrt(g/g22) e^1, tau2 = sqrt(g/g11) e^2."""
        g11, g12, g22, g = first_fundamental_form(self)
        e1, e2 = self.e1, self.e2
        up1 = (g22[..., None] * e1 - g12[..., None] * e2) / g[..., None]
        up2 = (-g12[..., None] * e1 + g11[..., None] * e2) / g[..., None]
        tau1 = np.sqrt(g / g22)[..., None] * up1
        tau2 = np.sqrt(g / g11)[..., None] * up2
        return tau1, tau2


def first_fundamental_form(jet: SurfaceJet):
    """Metric coefficients (g11, g12, g22) and determinant g."""
    e1, e2 = jet.e1, jet.e2
    g11 = np.einsum("...i,...i->...", e1, e1)
    g12 = np.einsum("...i,...i->...", e1, e2)
    g22 = np.einsum("...i,...i->...", e2, e2)
    g = g11 * g22 - g12**2
    tol = METRIC_RTOL * (0.5 * (g11 + g22)) ** 2
    if np.any(g <= tol):
        raise DegenerateMetricError("degenerate metric tensor at %d point(s)" % int(np.sum(g <= tol)))
    return g11, g12, g22, g


def second_fundamental_form(jet: SurfaceJet):
    """Coefficients L = x_11.n, M = x_12.n, N = x_22.n."""
    n = jet.normal
    L = np.einsum("...i,...i->...", jet.dx[..., 3, :], n)
    M = np.einsum("...i,...i->...", jet.dx[..., 4, :], n)
    N = np.einsum("...i,...i->...", jet.dx[..., 5, :], n)
    return L, M, N


def gauss_curvature(jet: SurfaceJet) -> np.ndarray:
    _, _, _, g = first_fundamental_form(jet)
    L, M, N = second_fundamental_form(jet)
    return (L * N - M**2) / g


def mean_curvature(jet: SurfaceJet) -> np.ndarray:
    """Mean curvature, positive for a sphere with outward normal."""
    g11, g12, g22, g = first_fundamental_form(jet)
    L, M, N = second_fundamental_form(jet)
    # outward normal makes L, N negative on convex surfaces
    return -(L * g22 - 2 * M * g12 + N * g11) / (2 * g)


@dataclass(frozen=True)
class ParametricPatch:
    """A smooth chart x(xi1, xi2) over [-1, 1]^2 with outward normal."""

    chart: Chart
    name: str = ""

    def evaluate(self, xi1, xi2) -> np.ndarray:
        s1 = TSeries.constant(np.asarray(xi1, dtype=float), 0)
        s2 = TSeries.constant(np.asarray(xi2, dtype=float), 0)
        comps = self.chart(s1, s2)
        return np.stack([c.value for c in comps], axis=-1)

    def jet(self, xi1, xi2) -> SurfaceJet:
        xi1 = np.asarray(xi1, dtype=float)
        xi2 = np.asarray(xi2, dtype=float)
        s1 = TSeries.variable(xi1, 0, X_ORDER)
        s2 = TSeries.variable(xi2, 1, X_ORDER)
        x = self.chart(s1, s2)
        x = tuple(c if isinstance(c, TSeries) else TSeries.constant(np.broadcast_to(c, xi1.shape), X_ORDER) for c in x)
        x1 = tuple(c.partial(0) for c in x)
        x2 = tuple(c.partial(1) for c in x)
        c = cross(x1, x2)
        area = sqrt(dot(c, c))
        n = tuple(ci / area for ci in c)
        dx = np.stack([ci.derivatives() for ci in x], axis=-1)
        dn = np.stack([ci.derivatives() for ci in n], axis=-1)
        return SurfaceJet(dx, dn)


# --------------------------------------------------------------------------
# built-in charts
# --------------------------------------------------------------------------
_E = np.eye(3)
# (outward axis, u, v) with u x v = axis
CUBE_FACES = (
    (_E[0], _E[1], _E[2]),
    (-_E[0], _E[2], _E[1]),
    (_E[1], _E[2], _E[0]),
    (-_E[1], _E[0], _E[2]),
    (_E[2], _E[0], _E[1]),
    (-_E[2], _E[1], _E[0]),
)


def _cube_point(face, xi1, xi2):
    axis, u, v = face
    return tuple(axis[i] + u[i] * xi1 + v[i] * xi2 for i in range(3))


def _unit_sphere_chart(face) -> Chart:
    def chart(xi1, xi2):
        c = _cube_point(face, xi1, xi2)
        r = sqrt(dot(c, c))
        return tuple(ci / r for ci in c)

    return chart


def _mapped(base: Chart, fn) -> Chart:
    def chart(xi1, xi2):
        return fn(base(xi1, xi2))

    return chart


def _affine(scale: Sequence[float], center: Sequence[float]):
    def fn(s):
        return tuple(s[i] * scale[i] + center[i] for i in range(3))

    return fn


def bean_map(s):
    """Smooth non-convex deformation (x, y, z) -> (x, 0.5 y + 0.4 x^2 - 0.2, 0.7 z).

    The map is a global diffeomorphism of R^3 with constant Jacobian 0.35,
    so the enclosed volume is 0.35 * 4 pi / 3 and normals stay outward.
    """
    return (s[0], 0.5 * s[1] + 0.4 * s[0] * s[0] - 0.2, 0.7 * s[2])


BEAN_VOLUME = 0.35 * 4.0 * np.pi / 3.0


def sphere_patches(radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> list[ParametricPatch]:
    if radius <= 0:
        raise ValueError("radius must be positive")
    fn = _affine((radius,) * 3, center)
    return [ParametricPatch(_mapped(_unit_sphere_chart(f), fn), f"sphere{i}") for i, f in enumerate(CUBE_FACES)]


def ellipsoid_patches(a: float, b: float, c: float, center=(0.0, 0.0, 0.0)) -> list[ParametricPatch]:
    if min(a, b, c) <= 0:
        raise ValueError("semi-axes must be positive")
    fn = _affine((a, b, c), center)
    return [ParametricPatch(_mapped(_unit_sphere_chart(f), fn), f"ellipsoid{i}") for i, f in enumerate(CUBE_FACES)]


def bean_patches() -> list[ParametricPatch]:
    return [ParametricPatch(_mapped(_unit_sphere_chart(f), bean_map), f"bean{i}") for i, f in enumerate(CUBE_FACES)]


def cube_patches(side: float = 2.0, center=(0.0, 0.0, 0.0)) -> list[ParametricPatch]:
    if side <= 0:
        raise ValueError("side must be positive")
    h = side / 2.0

    def face_chart(face):
        def chart(xi1, xi2):
            p = _cube_point(face, xi1, xi2)
            return tuple(p[i] * h + center[i] for i in range(3))

        return chart

    return [ParametricPatch(face_chart(f), f"cube{i}") for i, f in enumerate(CUBE_FACES)]


# --------------------------------------------------------------------------
# Chebyshev surface grids
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class SurfaceGrid:
    """Tensor Chebyshev-zero grids on a set of patches.

    Node arrays are flattened patch-major then row-major over (i, j), where
    ``i`` indexes xi1 and ``j`` indexes xi2.
    """

    patches: tuple
    N: int
    t: np.ndarray  # (N,) Fejer nodes
    omega: np.ndarray  # (N,) Fejer weights
    jet: SurfaceJet  # leading shape (n_nodes,)
    weights: np.ndarray  # (n_nodes,) surface-measure quadrature weights
    xi: np.ndarray = field(repr=False)  # (n_nodes, 2)
    patch_index: np.ndarray = field(repr=False)  # (n_nodes,)

    @property
    def points(self) -> np.ndarray:
        return self.jet.point

    @property
    def normals(self) -> np.ndarray:
        return self.jet.normal

    @property
    def n_patches(self) -> int:
        return len(self.patches)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def area(self) -> float:
        return float(self.weights.sum())

    def as_patch_arrays(self, values: np.ndarray) -> np.ndarray:
        """Reshape node values (n_nodes, ...) to (n_patches, N, N, ...)."""
        return values.reshape((self.n_patches, self.N, self.N) + values.shape[1:])


def build_grid(patches: Sequence[ParametricPatch], N: int) -> SurfaceGrid:
    from pwdi.chebyshev import fejer_rule

    if N < 1:
        raise ValueError("N must be >= 1")
    rule = fejer_rule(N)
    T1, T2 = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
    W = np.outer(rule.weights, rule.weights)
    dx, dn, w, xi, pidx = [], [], [], [], []
    for k, patch in enumerate(patches):
        jet = patch.jet(T1.ravel(), T2.ravel())
        jac = np.linalg.norm(np.cross(jet.e1, jet.e2), axis=-1)
        dx.append(jet.dx)
        dn.append(jet.dn)
        w.append(jac * W.ravel())
        xi.append(np.stack([T1.ravel(), T2.ravel()], axis=-1))
        pidx.append(np.full(N * N, k))
    return SurfaceGrid(
        patches=tuple(patches),
        N=N,
        t=rule.nodes,
        omega=rule.weights,
        jet=SurfaceJet(np.concatenate(dx), np.concatenate(dn)),
        weights=np.concatenate(w),
        xi=np.concatenate(xi),
        patch_index=np.concatenate(pidx),
    )


def make_sphere(radius: float = 1.0, center=(0.0, 0.0, 0.0), N: int = 16) -> SurfaceGrid:
    if N < 2:
        raise ValueError("N must be >= 2")
    return build_grid(sphere_patches(radius, center), N)


def make_ellipsoid(a: float, b: float, c: float, N: int = 16) -> SurfaceGrid:
    if N < 2:
        raise ValueError("N must be >= 2")
    return build_grid(ellipsoid_patches(a, b, c), N)


def make_bean(N: int = 16) -> SurfaceGrid:
    if N < 2:
        raise ValueError("N must be >= 2")
    return build_grid(bean_patches(), N)


def make_cube(side: float = 2.0, N: int = 16) -> SurfaceGrid:
    if N < 2:
        raise ValueError("N must be >= 2")
    return build_grid(cube_patches(side), N)


GEOMETRIES = {
    "sphere": lambda N, **kw: make_sphere(kw.get("radius", 1.0), kw.get("center", (0.0, 0.0, 0.0)), N),
    "ellipsoid": lambda N, **kw: make_ellipsoid(*kw.get("axes", (1.0, 0.8, 0.6)), N=N),
    "bean": lambda N, **kw: make_bean(N),
    "cube": lambda N, **kw: make_cube(kw.get("side", 2.0), N),
}


def jet_multi_indices(order: int) -> list[tuple[int, int]]:
    return multi_indices(order)


def n_jet_terms(order: int) -> int:
    return n_terms(order)
