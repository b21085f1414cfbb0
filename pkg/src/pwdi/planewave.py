"""Planewave expansion functions and interpolants.

Both interpolation procedures produce, at every anchor ``p``, expansion
functions ``Phi1_alpha`` and ``Phi2_alpha`` (|alpha| <= M) that are finite
sums of planewaves ``exp(i k d_t . (x - p))``. They are stored as amplitude
tables over a common direction list, which is all the solvers need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pwdi.taylor import multi_indices, n_terms

FAMILIES = ("combined", "dirichlet", "neumann")


@dataclass(frozen=True)
class ExpansionSet:
    """Expansion functions at a batch of P anchors.

    Attributes
    ----------
    anchors : (P, 3)
    directions : (P, T, 3) unit planewave directions (shared grids are broadcast)
    a : (P, n_alpha, T) amplitudes of Phi1_alpha (Dirichlet-trace family)
    b : (P, n_alpha, T) amplitudes of Phi2_alpha (Neumann-trace family)
    """

    anchors: np.ndarray
    directions: np.ndarray
    a: np.ndarray
    b: np.ndarray
    k: float
    order: int
    method: str
    paired: bool = False  # odd directions negate the preceding even ones

    @property
    def n_anchors(self) -> int:
        return self.anchors.shape[0]

    @property
    def multi_indices(self) -> list[tuple[int, int]]:
        return multi_indices(self.order)

    def amplitudes(self, density_jet: np.ndarray, eta: float, family: str = "combined") -> np.ndarray:
        """Combined planewave amplitudes (P, T) for density jets (P, n_alpha).

        ``family`` selects the full interpolant (``combined``), the double-layer
        specialization with eta = 0 (``dirichlet``) or the single-layer limit
        in which only the Neumann trace is matched (``neumann``).
        """
        density_jet = np.asarray(density_jet)
        if family == "combined":
            coef = self.a + 1j * eta * self.b
        elif family == "dirichlet":
            coef = self.a
        elif family == "neumann":
            coef = self.b
        else:
            raise ValueError(f"unknown family {family!r}")
        return np.einsum("pa,pat->pt", density_jet, coef)

    def interpolant(self, density_jet: np.ndarray, eta: float, family: str = "combined") -> "PlanewaveInterpolant":
        return PlanewaveInterpolant(
            self.anchors, self.directions, self.amplitudes(density_jet, eta, family), self.k
        )

    def subset(self, idx) -> "ExpansionSet":
        return ExpansionSet(
            self.anchors[idx], self.directions[idx], self.a[idx], self.b[idx], self.k, self.order, self.method, self.paired
        )


@dataclass(frozen=True)
class PlanewaveInterpolant:
    """Phi(x, p) = sum_t A_t exp(i k d_t . (x - p)) for a batch of anchors p.

    Evaluation methods take targets of shape (P, ..., 3): the leading axis
    is matched to the anchors.
    """

    anchors: np.ndarray  # (P, 3)
    directions: np.ndarray  # (P, T, 3)
    amplitudes: np.ndarray  # (P, T)
    k: float

    def _waves(self, x):
        x = np.asarray(x, dtype=float)
        extra = x.ndim - 2
        shp = (x.shape[0],) + (1,) * extra
        p = self.anchors.reshape(shp + (3,))
        d = self.directions.reshape((x.shape[0],) + (1,) * extra + self.directions.shape[1:])
        ph = np.einsum("...ti,...i->...t", d, x - p)
        return np.exp(1j * self.k * ph), d

    def _amp(self, ndim):
        return self.amplitudes.reshape((self.amplitudes.shape[0],) + (1,) * ndim + self.amplitudes.shape[1:])

    def evaluate(self, x) -> np.ndarray:
        W, _ = self._waves(x)
        return np.sum(self._amp(np.ndim(x) - 2) * W, axis=-1)

    def gradient(self, x) -> np.ndarray:
        W, d = self._waves(x)
        A = self._amp(np.ndim(x) - 2)
        return 1j * self.k * np.einsum("...t,...ti->...i", A * W, d)

    def evaluate_normal(self, q, n) -> np.ndarray:
        """grad Phi(q, p) . n(q)."""
        return np.einsum("...i,...i->...", self.gradient(q), np.asarray(n, dtype=float))

    def separable_coefficients(self) -> np.ndarray:
        """phi_t(p) with Phi(x, p) = sum_t phi_t(p) conj(w_t(p)) W_t(x).

        Only meaningful for anchor-independent directions; with
        w_t(p) = exp(i k d_t . p) these coefficients are the amplitudes.
        """
        return self.amplitudes.copy()


def check_order(order: int, allowed) -> None:
    if order not in allowed:
        raise ValueError(f"interpolation order {order} not supported (allowed: {sorted(allowed)})")


def jet_size(order: int) -> int:
    return n_terms(order)
