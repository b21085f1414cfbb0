"""Verification of the Taylor-like interpolation conditions at surface anchors.

The density and the interpolant are both expanded as Taylor series in the
chart coordinates, so the residuals rho = phi - Phi and
rho_n = i eta phi - Phi_n are available to all orders without finite
differences.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from pwdi.fields import Field, PlaneWave, PointSources
from pwdi.geometry import ParametricPatch
from pwdi.taylor import TSeries, cross, dot, n_terms, sqrt

log = logging.getLogger(__name__)

CONTACT_STEPS = 0.05 * 2.0 ** -np.arange(5)


@dataclass
class InterpCheckReport:
    """Scaled residuals per anchor and multi-index order."""

    order: int
    interp: str
    anchors: np.ndarray  # (P, 3)
    value_residual: np.ndarray  # (P, M + 2) max |d^alpha rho| / jet scale per total order
    normal_residual: np.ndarray  # (P, M + 2)
    contact_slope: np.ndarray  # (P,)

    @property
    def max_residual(self) -> float:
        """Worst scaled residual over all |alpha| <= M."""
        M = self.order
        return float(max(self.value_residual[:, : M + 1].max(), self.normal_residual[:, : M + 1].max()))

    @property
    def min_slope(self) -> float:
        return float(self.contact_slope.min())


def _field_series(field: Field, x):
    """The field as a Taylor series along the chart, for the supported fields."""
    k = field.k
    if isinstance(field, PointSources):
        out = 0
        for s, w in zip(field.positions, field.weights):
            R = tuple(x[i] - s[i] for i in range(3))
            r = sqrt(dot(R, R))
            out = out + (r * (1j * k)).exp() * w / r
        return out
    if isinstance(field, PlaneWave):
        d = field.direction
        return (sum(x[i] * d[i] for i in range(3)) * (1j * k)).exp()
    raise TypeError(f"no series expansion for {type(field).__name__}")


def _surface_series(patch: ParametricPatch, xi1, xi2, degree: int):
    s1 = TSeries.variable(xi1, 0, degree + 1)
    s2 = TSeries.variable(xi2, 1, degree + 1)
    x = patch.chart(s1, s2)
    x1 = tuple(c.partial(0) for c in x)
    x2 = tuple(c.partial(1) for c in x)
    c = cross(x1, x2)
    area = sqrt(dot(c, c))
    n = tuple(ci / area for ci in c)
    x = tuple(TSeries(ci.c[..., : n_terms(degree)], degree) for ci in x)
    return x, n


def _orders(degree: int) -> np.ndarray:
    return np.concatenate([np.full(d + 1, d) for d in range(degree + 1)])


def check_anchors(patch: ParametricPatch, xi1, xi2, field: Field, k: float, eta: float, M: int,
                  interp: str = "algebraic", steps=CONTACT_STEPS) -> InterpCheckReport:
    """Residuals of the order-M interpolant of ``field`` at chart points (xi1, xi2).

    Residuals are reported per total derivative order up to M + 1 (the first
    order that is not interpolated) and scaled by the largest entry of the
    density jet. The order of contact is the least-squares slope of
    log |rho| against log t along the surface curve xi + t (1, 1)/sqrt(2).
    """
    from pwdi.nystrom import check_setup, expansions

    check_setup("bw", M, interp)
    xi1 = np.atleast_1d(np.asarray(xi1, dtype=float))
    xi2 = np.atleast_1d(np.asarray(xi2, dtype=float))
    deg = M + 1
    x, n = _surface_series(patch, xi1, xi2, deg)
    phi = _field_series(field, x)
    dphi = phi.derivatives()
    dj = dphi[..., : n_terms(M)]

    jet = patch.jet(xi1, xi2)
    interp_ = expansions(jet, k, M, interp).interpolant(dj, eta)
    p = interp_.anchors
    Phi = 0
    grad = [0, 0, 0]
    for t in range(interp_.directions.shape[1]):
        d = interp_.directions[:, t]
        wave = (sum((x[i] - p[:, i]) * d[:, i] for i in range(3)) * (1j * k)).exp() * interp_.amplitudes[:, t]
        Phi = Phi + wave
        for i in range(3):
            grad[i] = grad[i] + wave * (1j * k * d[:, i])
    Phi_n = dot(grad, n)
    r1 = np.abs((phi - Phi).derivatives())
    r2 = np.abs((phi * (1j * eta) - Phi_n).derivatives())
    scale = np.abs(dphi[..., : n_terms(M)]).max(axis=-1, keepdims=True)
    scale = np.maximum(scale, np.finfo(float).tiny)
    orders = _orders(deg)
    res1 = np.stack([r1[:, orders == d].max(axis=-1) for d in range(deg + 1)], axis=-1) / scale
    res2 = np.stack([r2[:, orders == d].max(axis=-1) for d in range(deg + 1)], axis=-1) / scale

    steps = np.asarray(steps, dtype=float)
    u = np.array([1.0, 1.0]) / np.sqrt(2.0)
    rho = np.empty((xi1.size, steps.size))
    for j, t in enumerate(steps):
        pts = patch.evaluate(xi1 + t * u[0], xi2 + t * u[1])
        rho[:, j] = np.abs(field.value(pts) - interp_.evaluate(pts[:, None, :])[:, 0])
    rho = np.maximum(rho, 1e-300)
    A = np.stack([np.log(steps), np.ones_like(steps)], axis=-1)
    slope = np.linalg.lstsq(A, np.log(rho).T, rcond=None)[0][0]
    return InterpCheckReport(M, interp, p, res1, res2, slope)


def random_anchors(n: int, seed: int = 0, margin: float = 0.7):
    """Deterministic (patch index, xi1, xi2) samples away from patch edges."""
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, 6, size=n)
    xi = rng.uniform(-margin, margin, size=(n, 2))
    return idx, xi[:, 0], xi[:, 1]


def check_surface(patches, field: Field, k: float, eta: float, M: int, interp: str = "algebraic",
                  n_anchors: int = 50, seed: int = 0) -> InterpCheckReport:
    """check_anchors over ``n_anchors`` random chart points of a patch family."""
    idx, a, b = random_anchors(n_anchors, seed)
    idx = idx % len(patches)
    parts = []
    order = []
    for i in np.unique(idx):
        sel = np.flatnonzero(idx == i)
        order.append(sel)
        parts.append(check_anchors(patches[i], a[sel], b[sel], field, k, eta, M, interp))
    perm = np.argsort(np.concatenate(order))

    def cat(name):
        return np.concatenate([getattr(r, name) for r in parts])[perm]

    return InterpCheckReport(M, interp, cat("anchors"), cat("value_residual"), cat("normal_residual"), cat("contact_slope"))
