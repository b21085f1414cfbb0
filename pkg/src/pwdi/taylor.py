"""Truncated bivariate Taylor series.

A series of degree ``D`` stores the coefficients of all monomials
``h1**a * h2**b`` with ``a + b <= D`` in the graded order
(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), (3,0), ...
Partial derivatives follow from ``d^alpha f = alpha! * coeff[alpha]``.

Used to obtain exact chart jets (and jets of composed functions such as
planewaves restricted to a surface) without finite differences.
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np


def multi_indices(degree: int) -> list[tuple[int, int]]:
    """Multi-indices of total order <= ``degree`` in graded order."""
    out = []
    for d in range(degree + 1):
        for a in range(d, -1, -1):
            out.append((a, d - a))
    return out


def n_terms(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


@lru_cache(maxsize=None)
def _index(degree: int) -> dict[tuple[int, int], int]:
    return {mi: i for i, mi in enumerate(multi_indices(degree))}


@lru_cache(maxsize=None)
def _product_table(degree: int) -> np.ndarray:
    mis = multi_indices(degree)
    idx = _index(degree)
    K = len(mis)
    T = np.zeros((K, K, K))
    for i, (a1, b1) in enumerate(mis):
        for j, (a2, b2) in enumerate(mis):
            key = (a1 + a2, b1 + b2)
            if key in idx:
                T[i, j, idx[key]] = 1.0
    return T


@lru_cache(maxsize=None)
def factorial_weights(degree: int) -> np.ndarray:
    """alpha! for every multi-index, in graded order."""
    return np.array([factorial(a) * factorial(b) for a, b in multi_indices(degree)], dtype=float)


class TSeries:
    """Truncated Taylor series with coefficients along the last axis."""

    __array_priority__ = 1000

    def __init__(self, coeffs, degree: int):
        self.c = np.asarray(coeffs)
        self.degree = degree
        if self.c.shape[-1] != n_terms(degree):
            raise ValueError("coefficient axis does not match degree")

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, degree: int) -> "TSeries":
        value = np.asarray(value)
        c = np.zeros(value.shape + (n_terms(degree),), dtype=np.result_type(value, float))
        c[..., 0] = value
        return cls(c, degree)

    @classmethod
    def variable(cls, value, which: int, degree: int) -> "TSeries":
        """Series of the coordinate ``xi_which`` expanded about ``value``."""
        s = cls.constant(value, degree)
        if degree >= 1:
            s.c[..., 1 + which] = 1.0
        return s

    # helpers ------------------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def derivatives(self) -> np.ndarray:
        """All partial derivatives d^alpha f, alpha in graded order."""
        return self.c * factorial_weights(self.degree)

    def _coerce(self, other) -> "TSeries":
        if isinstance(other, TSeries):
            if other.degree != self.degree:
                raise ValueError("degree mismatch")
            return other
        return TSeries.constant(other, self.degree)

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        o = self._coerce(other)
        return TSeries(self.c + o.c, self.degree)

    __radd__ = __add__

    def __neg__(self):
        return TSeries(-self.c, self.degree)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, TSeries):
            other = np.asarray(other)
            return TSeries(self.c * other[..., None], self.degree)
        T = _product_table(self.degree)
        K = T.shape[0]
        a, b = np.broadcast_arrays(self.c, other.c)
        # outer product then one matmul against the flattened table (BLAS instead of einsum)
        outer = (a[..., :, None] * b[..., None, :]).reshape(a.shape[:-1] + (K * K,))
        return TSeries(outer @ T.reshape(K * K, K), self.degree)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, TSeries):
            other = np.asarray(other)
            return TSeries(self.c / other[..., None], self.degree)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n: int):
        out = TSeries.constant(np.ones_like(self.value), self.degree)
        for _ in range(n):
            out = out * self
        return out

    def _compose(self, derivs) -> "TSeries":
        """f(self) given [f(a0), f'(a0), f''(a0), ...] at a0 = self.value."""
        a0 = self.value
        u = TSeries(self.c.copy(), self.degree)
        u.c[..., 0] = 0
        out = TSeries.constant(derivs[0], self.degree)
        term = TSeries.constant(np.ones_like(a0), self.degree)
        for j in range(1, self.degree + 1):
            term = term * u
            out = out + term * (derivs[j] / factorial(j))
        return out

    def reciprocal(self) -> "TSeries":
        a = self.value
        derivs = [(-1) ** j * factorial(j) / a ** (j + 1) for j in range(self.degree + 1)]
        return self._compose(derivs)

    def sqrt(self) -> "TSeries":
        a = self.value
        derivs = []
        coef = 1.0
        for j in range(self.degree + 1):
            derivs.append(coef * a ** (0.5 - j))
            coef *= 0.5 - j
        return self._compose(derivs)

    def sin(self) -> "TSeries":
        a = self.value
        cyc = [np.sin(a), np.cos(a), -np.sin(a), -np.cos(a)]
        return self._compose([cyc[j % 4] for j in range(self.degree + 1)])

    def cos(self) -> "TSeries":
        a = self.value
        cyc = [np.cos(a), -np.sin(a), -np.cos(a), np.sin(a)]
        return self._compose([cyc[j % 4] for j in range(self.degree + 1)])

    def exp(self) -> "TSeries":
        e = np.exp(self.value)
        return self._compose([e] * (self.degree + 1))

    def partial(self, which: int) -> "TSeries":
        """Derivative series d/dxi_which, one degree lower."""
        mis = multi_indices(self.degree - 1)
        idx = _index(self.degree)
        cols = []
        for a, b in mis:
            if which == 0:
                cols.append((a + 1) * self.c[..., idx[(a + 1, b)]])
            else:
                cols.append((b + 1) * self.c[..., idx[(a, b + 1)]])
        return TSeries(np.stack(cols, axis=-1), self.degree - 1)


def sqrt(s):
    return s.sqrt() if isinstance(s, TSeries) else np.sqrt(s)


def dot(u, v):
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


def cross(u, v):
    return (
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    )
