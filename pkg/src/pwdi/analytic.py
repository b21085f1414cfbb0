"""Closed-form planewave expansion functions for orders M = 0 and 1.

The trigonometric building blocks sin(k d.(x-p)) and cos(k d.(x-p)), and
products of two sines along orthogonal half-length directions, are expanded
into exponentials, so the result is an ordinary :class:`ExpansionSet` with
anchor-dependent directions n, tau1, tau2, (n +- tau1)/sqrt2, (n +- tau2)/sqrt2,
each followed by its negative.
"""

from __future__ import annotations

import numpy as np

from pwdi.geometry import SurfaceJet, first_fundamental_form, second_fundamental_form
from pwdi.planewave import ExpansionSet, PlanewaveInterpolant, check_order

SQRT2 = np.sqrt(2.0)


def _directions(n, tau1, tau2, order):
    if order == 0:
        return np.stack([n, -n], axis=1)
    s = 1.0 / SQRT2
    return np.stack(
        [
            n, -n, tau1, -tau1, tau2, -tau2,
            s * (n + tau1), s * (-n - tau1), s * (n - tau1), s * (-n + tau1),
            s * (n + tau2), s * (-n - tau2), s * (n - tau2), s * (-n + tau2),
        ],
        axis=1,
    )


def analytic_expansions(jet: SurfaceJet, k: float, order: int) -> ExpansionSet:
    """Expansion functions Phi1_alpha, Phi2_alpha at every point of ``jet``.

    The jet is flattened to a batch of P anchors.
    """
    check_order(order, {0, 1})
    jet = jet.flat()
    n = jet.normal
    P = n.shape[0]
    g11, g12, g22, g = first_fundamental_form(jet)
    L, M, N = second_fundamental_form(jet)
    tau1, tau2 = jet.tangents()
    dirs = _directions(n, tau1, tau2, order)
    T = dirs.shape[1]
    nalpha = 1 if order == 0 else 3
    a = np.zeros((P, nalpha, T), dtype=complex)
    b = np.zeros((P, nalpha, T), dtype=complex)
    # C(n) and S(n)/k
    a[:, 0, 0] = 0.5
    a[:, 0, 1] = 0.5
    b[:, 0, 0] = 1.0 / (2j * k)
    b[:, 0, 1] = -1.0 / (2j * k)
    if order == 1:
        s1 = np.sqrt(g22 / g)
        s2 = np.sqrt(g11 / g)
        # (2/k^2) S(n/sqrt2) S(tau/sqrt2) over the four mixed directions
        ss = np.array([-0.25, -0.25, 0.25, 0.25]) * 2.0 / k**2
        b[:, 1, 6:10] = s1[:, None] * ss
        b[:, 2, 10:14] = s2[:, None] * ss
        c11 = (g12 * M - g22 * L) / g
        c12 = (g12 * N - g22 * M) / g
        c21 = (g12 * L - g11 * M) / g
        c22 = (g12 * M - g11 * N) / g
        a[:, 1, 2] = s1 / (2j * k)
        a[:, 1, 3] = -s1 / (2j * k)
        a[:, 1] -= c11[:, None] * b[:, 1] + c12[:, None] * b[:, 2]
        a[:, 2, 4] = s2 / (2j * k)
        a[:, 2, 5] = -s2 / (2j * k)
        a[:, 2] -= c21[:, None] * b[:, 1] + c22[:, None] * b[:, 2]
    return ExpansionSet(jet.point.copy(), dirs, a, b, k, order, "analytic", paired=True)


def build_analytic(p_jet: SurfaceJet, density_jet, k: float, eta: float, order: int, family: str = "combined") -> PlanewaveInterpolant:
    """Closed-form interpolant of order 0 or 1 anchored at the point(s) of ``p_jet``.

    ``density_jet`` holds phi(p) and, for order 1, d_1 phi(p), d_2 phi(p)
    (shape (n_alpha,) for a single anchor or (P, n_alpha)).
    """
    exp = analytic_expansions(p_jet, k, order)
    dj = np.atleast_2d(np.asarray(density_jet))
    return exp.interpolant(dj[:, : exp.a.shape[1]], eta, family)
