"""Full GMRES for matrix-free complex linear maps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)


class GMRESBreakdown(ArithmeticError):
    """Non-finite values appeared in the Krylov process."""


@dataclass(frozen=True)
class KrylovConfig:
    """tol: relative residual target; restart: None for full GMRES."""

    tol: float = 1e-8
    max_iter: int = 500
    restart: int | None = None

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.restart is not None and self.restart < 1:
            raise ValueError("restart must be >= 1")


@dataclass
class GMRESResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residuals: list = field(default_factory=list)  # relative residual norms, starting at 1

    @property
    def residual(self) -> float:
        return self.residuals[-1]


def _givens(a, b):
    if b == 0:
        return 1.0, 0.0
    if a == 0:
        return 0.0, 1.0
    r = np.hypot(abs(a), abs(b))
    c = abs(a) / r
    s = (a / abs(a)) * np.conj(b) / r
    return c, s


def gmres(apply: Callable[[np.ndarray], np.ndarray], rhs, cfg: KrylovConfig | None = None, x0=None) -> GMRESResult:
    """Solve apply(x) = rhs by GMRES with modified Gram-Schmidt plus one
    reorthogonalization pass and Givens-rotation least squares.

    The recorded residuals are the (monotone) least-squares estimates,
    normalized by ||rhs||. With ``cfg.restart`` the method restarts every
    ``restart`` inner steps; the default is full GMRES.
    """
    cfg = cfg or KrylovConfig()
    b = np.asarray(rhs, dtype=complex)
    n = b.shape[0]
    bnorm = np.linalg.norm(b)
    x = np.zeros(n, dtype=complex) if x0 is None else np.array(x0, dtype=complex)
    if bnorm == 0:
        return GMRESResult(np.zeros(n, dtype=complex), 0, True, [0.0])
    history = [1.0]
    total = 0
    m_max = cfg.restart or cfg.max_iter
    while True:
        r = b - apply(x) if total or x0 is not None else b.copy()
        beta = np.linalg.norm(r)
        if not np.isfinite(beta):
            raise GMRESBreakdown("non-finite residual")
        if beta / bnorm <= cfg.tol:
            return GMRESResult(x, total, True, history)
        m = min(m_max, cfg.max_iter - total)
        V = np.zeros((m + 1, n), dtype=complex)
        H = np.zeros((m + 1, m), dtype=complex)
        cs = np.zeros(m)
        sn = np.zeros(m, dtype=complex)
        g = np.zeros(m + 1, dtype=complex)
        g[0] = beta
        V[0] = r / beta
        j_done = 0
        converged = False
        for j in range(m):
            w = apply(V[j])
            if not np.all(np.isfinite(w)):
                raise GMRESBreakdown(f"non-finite matvec at iteration {total + j + 1}")
            for _ in range(2):
                for i in range(j + 1):
                    h = np.vdot(V[i], w)
                    H[i, j] += h
                    w = w - h * V[i]
            hn = np.linalg.norm(w)
            H[j + 1, j] = hn
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            cs[j], sn[j] = _givens(H[j, j], H[j + 1, j])
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]
            j_done = j + 1
            rel = abs(g[j + 1]) / bnorm
            history.append(min(rel, history[-1]))
            if rel <= cfg.tol:
                converged = True
                break
            if hn <= 1e-14 * beta:  # happy breakdown: the Krylov space is invariant
                converged = True
                break
            V[j + 1] = w / hn
        y = np.linalg.solve(np.triu(H[:j_done, :j_done]), g[:j_done])
        x = x + V[:j_done].T @ y
        total += j_done
        if converged or total >= cfg.max_iter:
            log.info("gmres: %d iterations, residual estimate %.2e", total, history[-1])
            return GMRESResult(x, total, converged, history)
