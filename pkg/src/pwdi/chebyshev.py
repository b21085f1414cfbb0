"""Fejer's first quadrature rule and Chebyshev spectral differentiation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import fft

from pwdi.taylor import multi_indices


@dataclass(frozen=True)
class FejerRule:
    N: int
    nodes: np.ndarray
    weights: np.ndarray


def fejer_rule(N: int) -> FejerRule:
    """Open rule on the Chebyshev zeros t_j = cos((2j-1) pi / 2N)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    theta = (2 * np.arange(1, N + 1) - 1) * np.pi / (2 * N)
    ell = np.arange(1, N // 2 + 1)
    s = np.cos(2 * np.outer(theta, ell)) / (4 * ell**2 - 1)
    w = 2.0 / N * (1 - 2 * s.sum(axis=1))
    return FejerRule(N, np.cos(theta), w)


def cheb_coefficients(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """Chebyshev coefficients from samples at the N Chebyshev zeros (DCT-II)."""
    N = values.shape[axis]
    a = fft.dct(values, type=2, axis=axis) / N
    sl = [slice(None)] * values.ndim
    sl[axis] = 0
    a[tuple(sl)] *= 0.5
    return a


def cheb_values(coeffs: np.ndarray, axis: int = 0) -> np.ndarray:
    """Inverse of :func:`cheb_coefficients` (DCT-III)."""
    b = np.array(coeffs, dtype=np.result_type(coeffs, float), copy=True)
    sl = [slice(None)] * b.ndim
    sl[axis] = slice(1, None)
    b[tuple(sl)] *= 0.5
    return fft.dct(b, type=3, axis=axis)


def _diff_axis(values: np.ndarray, order: int, axis: int) -> np.ndarray:
    if order == 0:
        return values
    N = values.shape[axis]
    a = cheb_coefficients(values, axis)
    d = C.chebder(a, m=order, axis=axis)
    pad = [(0, 0)] * values.ndim
    pad[axis] = (0, N - d.shape[axis])
    d = np.pad(d, pad)
    return cheb_values(d, axis)


def spectral_derivatives(values: np.ndarray, order: int) -> np.ndarray:
    """All d^alpha f, |alpha| <= order, from samples on the tensor zero grid.

    ``values`` has shape (..., N, N) with xi1 along axis -2 and xi2 along
    axis -1. Returns shape (n_alpha, ..., N, N) in graded multi-index order.
    """
    values = np.asarray(values)
    out = []
    cache = {}
    for a1, a2 in multi_indices(order):
        if a1 not in cache:
            cache[a1] = _diff_axis(values, a1, values.ndim - 2)
        out.append(_diff_axis(cache[a1], a2, values.ndim - 1))
    return np.stack(out)


def differentiation_matrix(N: int, order: int = 1) -> np.ndarray:
    """Matrix D with (D f) = d^order f / dt^order at the zeros, built from the DCT path."""
    return _diff_axis(np.eye(N), order, 0)


def tensor_coefficients(values: np.ndarray) -> np.ndarray:
    """2D Chebyshev coefficients over the last two axes."""
    return cheb_coefficients(cheb_coefficients(values, values.ndim - 2), values.ndim - 1)


def evaluate_jet(coeffs: np.ndarray, xi1: float, xi2: float, order: int) -> np.ndarray:
    """d^alpha f(xi1, xi2), |alpha| <= order, from 2D coefficients (N, N)."""
    out = []
    for a1, a2 in multi_indices(order):
        c = coeffs
        if a1:
            c = C.chebder(c, m=a1, axis=0)
        if a2:
            c = C.chebder(c, m=a2, axis=1)
        out.append(C.chebval2d(xi1, xi2, c))
    return np.array(out)
