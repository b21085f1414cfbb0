"""Helmholtz kernels: pointwise evaluation and compiled dense/moment assembly.

Conventions: ``x`` (or ``p``) is the target, ``q`` the source, ``R = x - q``.
Source quadrature is described by a scalar weight ``sw`` (for kernels that
do not involve the source normal) and a weighted normal ``sm = sw * n(q)``;
every kernel is linear in ``n(q)``, so nodal rules whose normal differs per
adjacent element (BEM) collapse into a single weighted normal per node.
"""

from __future__ import annotations

import numba as nb
import numpy as np

FOUR_PI = 4.0 * np.pi

# coefficient slots of the combined dense kernel
SLOT_S, SLOT_D, SLOT_KP, SLOT_N, SLOT_NN = range(5)

# moment kinds
MOM_BW, MOM_BM, MOM_MAUE = 0, 1, 2


class CoincidentPointError(ValueError):
    pass


def kernel_eval(k: float, x, y, nx=None, ny=None):
    """G, dG/dn(y), dG/dn(x) and d2G/dn(x)dn(y) for arrays of point pairs.

    Returns a dict; the normal derivatives are present only when the
    corresponding normals are passed.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    R = x - y
    r = np.linalg.norm(R, axis=-1)
    if np.any(r == 0):
        raise CoincidentPointError("kernel evaluated at coincident points")
    eikr = np.exp(1j * k * r)
    G = eikr / (FOUR_PI * r)
    out = {"G": G}
    f = eikr * (1j * k * r - 1) / (FOUR_PI * r**3)  # grad_x G = f R
    if ny is not None:
        out["dG_dny"] = -f * np.einsum("...i,...i->...", R, ny)
    if nx is not None:
        out["dG_dnx"] = f * np.einsum("...i,...i->...", R, nx)
    if nx is not None and ny is not None:
        g = eikr * (3 - 3j * k * r - (k * r) ** 2) / (FOUR_PI * r**5)
        Rnx = np.einsum("...i,...i->...", R, nx)
        Rny = np.einsum("...i,...i->...", R, ny)
        out["d2G_dnxdny"] = -g * Rnx * Rny - f * np.einsum("...i,...i->...", nx, ny)
    return out


@nb.njit(cache=True, fastmath=False)
def _pair(k, Rx, Ry, Rz):
    r2 = Rx * Rx + Ry * Ry + Rz * Rz
    r = np.sqrt(r2)
    c = np.cos(k * r)
    s = np.sin(k * r)
    e = complex(c, s)
    G = e / (FOUR_PI * r)
    f = e * complex(-1.0, k * r) / (FOUR_PI * r2 * r)
    return r, e, G, f


@nb.njit(cache=True)
def dense_kernel(tgt, tn, src, sw, sm, k, coef, skip):
    """sum_s coef[s] * kernel_s(p, q) with source weights folded in.

    Slots: S = G sw, D = grad_q G . sm, KP = dG/dn_p sw, N = d2G/dn_p dn_q
    (against sm) and NN = G (n_p . sm). ``skip[p]`` is a source index whose
    contribution is dropped (the target itself on Nystrom grids), or -1.
    """
    P = tgt.shape[0]
    Q = src.shape[0]
    out = np.zeros((P, Q), dtype=np.complex128)
    cS, cD, cK, cN, cNN = coef[0], coef[1], coef[2], coef[3], coef[4]
    for p in range(P):
        px, py, pz = tgt[p, 0], tgt[p, 1], tgt[p, 2]
        nx, ny, nz = tn[p, 0], tn[p, 1], tn[p, 2]
        for q in range(Q):
            if q == skip[p]:
                continue
            Rx = px - src[q, 0]
            Ry = py - src[q, 1]
            Rz = pz - src[q, 2]
            r, e, G, f = _pair(k, Rx, Ry, Rz)
            Rsm = Rx * sm[q, 0] + Ry * sm[q, 1] + Rz * sm[q, 2]
            val = 0j
            if cS != 0:
                val += cS * G * sw[q]
            if cD != 0:
                val += -cD * f * Rsm
            if cK != 0 or cN != 0 or cNN != 0:
                Rn = Rx * nx + Ry * ny + Rz * nz
                nsm = nx * sm[q, 0] + ny * sm[q, 1] + nz * sm[q, 2]
                if cK != 0:
                    val += cK * f * Rn * sw[q]
                if cN != 0:
                    g = e * complex(3.0 - (k * r) ** 2, -3.0 * k * r) / (FOUR_PI * r**5)
                    val += cN * (-g * Rn * Rsm - f * nsm)
                if cNN != 0:
                    val += cNN * G * nsm
            out[p, q] = val
    return out


@nb.njit(cache=True)
def pair_kernels(tgt, src, sm, k):
    """Unweighted G(p, q) and grad_q G . sm(q), both (P, Q), in one pass."""
    P = tgt.shape[0]
    Q = src.shape[0]
    G = np.empty((P, Q), dtype=np.complex128)
    D = np.empty((P, Q), dtype=np.complex128)
    for p in range(P):
        px, py, pz = tgt[p, 0], tgt[p, 1], tgt[p, 2]
        for q in range(Q):
            Rx = px - src[q, 0]
            Ry = py - src[q, 1]
            Rz = pz - src[q, 2]
            r, e, g, f = _pair(k, Rx, Ry, Rz)
            G[p, q] = g
            D[p, q] = -f * (Rx * sm[q, 0] + Ry * sm[q, 1] + Rz * sm[q, 2])
    return G, D


@nb.njit(cache=True)
def curl_kernel(tgt, tn, src, sn, sw, up1, up2, k, skip):
    """Matrices B_i[p, q] = sw (n_p x grad_p G) . (n_q x e^i(q)), i = 1, 2.

    Applied to the chart derivatives d_i phi(q) they give the surface-curl
    pairing of the Maue form.
    """
    P = tgt.shape[0]
    Q = src.shape[0]
    out = np.zeros((2, P, Q), dtype=np.complex128)
    for p in range(P):
        px, py, pz = tgt[p, 0], tgt[p, 1], tgt[p, 2]
        nx, ny, nz = tn[p, 0], tn[p, 1], tn[p, 2]
        for q in range(Q):
            if q == skip[p]:
                continue
            Rx = px - src[q, 0]
            Ry = py - src[q, 1]
            Rz = pz - src[q, 2]
            r, e, G, f = _pair(k, Rx, Ry, Rz)
            nn = nx * sn[q, 0] + ny * sn[q, 1] + nz * sn[q, 2]
            Rnq = Rx * sn[q, 0] + Ry * sn[q, 1] + Rz * sn[q, 2]
            # (n_p x a).(n_q x b) = (n_p.n_q)(a.b) - (n_p.b)(a.n_q), a = f R
            R1 = Rx * up1[q, 0] + Ry * up1[q, 1] + Rz * up1[q, 2]
            n1 = nx * up1[q, 0] + ny * up1[q, 1] + nz * up1[q, 2]
            R2 = Rx * up2[q, 0] + Ry * up2[q, 1] + Rz * up2[q, 2]
            n2 = nx * up2[q, 0] + ny * up2[q, 1] + nz * up2[q, 2]
            out[0, p, q] = sw[q] * f * (nn * R1 - n1 * Rnq)
            out[1, p, q] = sw[q] * f * (nn * R2 - n2 * Rnq)
    return out


@nb.njit(cache=True)
def _moment_terms(kind, k, Rx, Ry, Rz, nx, ny, nz, s0, s1, s2):
    """Per-pair factors: slot0 = (a0 + u . d) W and slot1 = c1 (d . sm) W."""
    r, e, G, f = _pair(k, Rx, Ry, Rz)
    ik = 1j * k
    Rsm = Rx * s0 + Ry * s1 + Rz * s2
    u0 = 0j
    u1 = 0j
    u2 = 0j
    if kind == 0:
        a0 = -f * Rsm
        c1 = G * ik
    else:
        Rn = Rx * nx + Ry * ny + Rz * nz
        nsm = nx * s0 + ny * s1 + nz * s2
        c1 = f * Rn * ik
        if kind == 1:
            g = e * complex(3.0 - (k * r) ** 2, -3.0 * k * r) / (FOUR_PI * r**5)
            a0 = -g * Rn * Rsm - f * nsm
        else:
            # k^2 G n_p.sm + i k f [(n_p.sm) R - (R.sm) n_p] . d
            a0 = k * k * G * nsm
            h = ik * f
            u0 = h * (nsm * Rx - Rsm * nx)
            u1 = h * (nsm * Ry - Rsm * ny)
            u2 = h * (nsm * Rz - Rsm * nz)
    return a0, u0, u1, u2, c1


@nb.njit(cache=True)
def moments(tgt, tn, dirs, src, sw, sm, k, kind, skip, paired):
    """Kernel moments of the planewaves W_t(q - p) = exp(i k d_t . (q - p)).

    ``dirs`` has shape (P, T, 3) (anchor-dependent directions). When
    ``paired`` is set, odd directions are the negatives of the preceding
    even ones and their waves are obtained by conjugation. Returns (2, P, T):

    * BW:   [sum grad_q G . sm W,   sum G (i k d . sm) W]
    * BM:   [sum d2G/dn_p dn_q W,   sum dG/dn_p (i k d . sm) W]
    * MAUE: [sum (k^2 G n_p . sm + (n_p x grad_p G) . (sm x i k d)) W,
             sum dG/dn_p (i k d . sm) W]
    """
    P = tgt.shape[0]
    T = dirs.shape[1]
    Q = src.shape[0]
    out = np.zeros((2, P, T), dtype=np.complex128)
    W = np.empty(T, dtype=np.complex128)
    for p in range(P):
        px, py, pz = tgt[p, 0], tgt[p, 1], tgt[p, 2]
        nx, ny, nz = tn[p, 0], tn[p, 1], tn[p, 2]
        for q in range(Q):
            if q == skip[p]:
                continue
            Rx = px - src[q, 0]
            Ry = py - src[q, 1]
            Rz = pz - src[q, 2]
            s0, s1, s2 = sm[q, 0], sm[q, 1], sm[q, 2]
            a0, u0, u1, u2, c1 = _moment_terms(kind, k, Rx, Ry, Rz, nx, ny, nz, s0, s1, s2)
            for t in range(T):
                if paired and t % 2 == 1:
                    W[t] = W[t - 1].conjugate()
                else:
                    ph = -k * (dirs[p, t, 0] * Rx + dirs[p, t, 1] * Ry + dirs[p, t, 2] * Rz)
                    W[t] = complex(np.cos(ph), np.sin(ph))
            for t in range(T):
                d0, d1, d2 = dirs[p, t, 0], dirs[p, t, 1], dirs[p, t, 2]
                out[0, p, t] += (a0 + u0 * d0 + u1 * d1 + u2 * d2) * W[t]
                out[1, p, t] += c1 * (d0 * s0 + d1 * s1 + d2 * s2) * W[t]
    return out


@nb.njit(cache=True)
def moments_shared(tgt, tn, dirs, src, sw, sm, k, kind, skip):
    """:func:`moments` for one direction set (T, 3) shared by all targets.

    The waves factor as exp(-i k d.p) exp(i k d.q), so only phase tables
    are evaluated.
    """
    P = tgt.shape[0]
    T = dirs.shape[0]
    Q = src.shape[0]
    eq = np.empty((Q, T), dtype=np.complex128)
    for q in range(Q):
        for t in range(T):
            ph = k * (dirs[t, 0] * src[q, 0] + dirs[t, 1] * src[q, 1] + dirs[t, 2] * src[q, 2])
            eq[q, t] = complex(np.cos(ph), np.sin(ph))
    out = np.zeros((2, P, T), dtype=np.complex128)
    acc0 = np.zeros(T, dtype=np.complex128)
    acc1 = np.zeros(T, dtype=np.complex128)
    for p in range(P):
        px, py, pz = tgt[p, 0], tgt[p, 1], tgt[p, 2]
        nx, ny, nz = tn[p, 0], tn[p, 1], tn[p, 2]
        acc0[:] = 0
        acc1[:] = 0
        for q in range(Q):
            if q == skip[p]:
                continue
            Rx = px - src[q, 0]
            Ry = py - src[q, 1]
            Rz = pz - src[q, 2]
            s0, s1, s2 = sm[q, 0], sm[q, 1], sm[q, 2]
            a0, u0, u1, u2, c1 = _moment_terms(kind, k, Rx, Ry, Rz, nx, ny, nz, s0, s1, s2)
            for t in range(T):
                d0, d1, d2 = dirs[t, 0], dirs[t, 1], dirs[t, 2]
                acc0[t] += (a0 + u0 * d0 + u1 * d1 + u2 * d2) * eq[q, t]
                acc1[t] += c1 * (d0 * s0 + d1 * s1 + d2 * s2) * eq[q, t]
        for t in range(T):
            ph = -k * (dirs[t, 0] * px + dirs[t, 1] * py + dirs[t, 2] * pz)
            w = complex(np.cos(ph), np.sin(ph))
            out[0, p, t] = acc0[t] * w
            out[1, p, t] = acc1[t] * w
    return out


@nb.njit(cache=True)
def moments_grouped(tgt, group, dirs, src, sm, k, paired):
    """BW moments for targets that share directions in consecutive groups.

    ``tgt`` (P, 3) holds P = G * group targets; ``dirs`` (G, T, 3) the
    directions of each group. The waves are tabulated once per group
    about the group centre c and shifted by exp(i k d . (c - p)).
    """
    ng = dirs.shape[0]
    T = dirs.shape[1]
    Q = src.shape[0]
    out = np.zeros((2, ng * group, T), dtype=np.complex128)
    W = np.empty(T, dtype=np.complex128)
    WD = np.empty(T, dtype=np.complex128)
    a0 = np.empty(group, dtype=np.complex128)
    c1 = np.empty(group, dtype=np.complex128)
    acc0 = np.zeros((group, T), dtype=np.complex128)
    acc1 = np.zeros((group, T), dtype=np.complex128)
    ik = 1j * k
    for gi in range(ng):
        cx = 0.0
        cy = 0.0
        cz = 0.0
        for l in range(group):
            cx += tgt[gi * group + l, 0] / group
            cy += tgt[gi * group + l, 1] / group
            cz += tgt[gi * group + l, 2] / group
        acc0[:, :] = 0
        acc1[:, :] = 0
        for q in range(Q):
            s0, s1, s2 = sm[q, 0], sm[q, 1], sm[q, 2]
            for t in range(T):
                if paired and t % 2 == 1:
                    W[t] = W[t - 1].conjugate()
                    WD[t] = -WD[t - 1].conjugate()
                else:
                    ph = k * (dirs[gi, t, 0] * (src[q, 0] - cx) + dirs[gi, t, 1] * (src[q, 1] - cy)
                              + dirs[gi, t, 2] * (src[q, 2] - cz))
                    W[t] = complex(np.cos(ph), np.sin(ph))
                    WD[t] = (dirs[gi, t, 0] * s0 + dirs[gi, t, 1] * s1 + dirs[gi, t, 2] * s2) * W[t]
            for l in range(group):
                p = gi * group + l
                Rx = tgt[p, 0] - src[q, 0]
                Ry = tgt[p, 1] - src[q, 1]
                Rz = tgt[p, 2] - src[q, 2]
                r, e, G, f = _pair(k, Rx, Ry, Rz)
                a0[l] = -f * (Rx * s0 + Ry * s1 + Rz * s2)
                c1[l] = G * ik
            for l in range(group):
                al = a0[l]
                cl = c1[l]
                for t in range(T):
                    acc0[l, t] += al * W[t]
                    acc1[l, t] += cl * WD[t]
        for l in range(group):
            p = gi * group + l
            for t in range(T):
                ph = k * (dirs[gi, t, 0] * (cx - tgt[p, 0]) + dirs[gi, t, 1] * (cy - tgt[p, 1])
                          + dirs[gi, t, 2] * (cz - tgt[p, 2]))
                w = complex(np.cos(ph), np.sin(ph))
                out[0, p, t] = acc0[l, t] * w
                out[1, p, t] = acc1[l, t] * w
    return out


def compute_moments(tgt, tn, directions, src, sw, sm, k, kind, skip=None, paired=False):
    """Dispatch to the shared-direction or per-anchor moment kernel."""
    tgt = np.ascontiguousarray(tgt, dtype=float)
    tn = np.ascontiguousarray(tn, dtype=float)
    if skip is None:
        skip = no_skip(tgt.shape[0])
    d = np.asarray(directions, dtype=float)
    if d.ndim == 3 and d.shape[0] > 1 and np.all(d == d[:1]):
        d = d[0]
    elif d.ndim == 3 and d.shape[0] == 1 and tgt.shape[0] > 1:
        d = d[0]
    if d.ndim == 2:
        return moments_shared(tgt, tn, np.ascontiguousarray(d), src, sw, sm, k, kind, skip)
    return moments(tgt, tn, np.ascontiguousarray(d), src, sw, sm, k, kind, skip, paired)


def as_dirs(dirs: np.ndarray, P: int) -> np.ndarray:
    """Broadcast global (T, 3) directions to (P, T, 3)."""
    dirs = np.asarray(dirs, dtype=float)
    if dirs.ndim == 2:
        dirs = np.broadcast_to(dirs, (P,) + dirs.shape)
    return np.ascontiguousarray(dirs)


def no_skip(P: int) -> np.ndarray:
    return np.full(P, -1, dtype=np.int64)
