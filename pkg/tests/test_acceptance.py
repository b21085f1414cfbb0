"""Acceptance runs.

Each test prints one ``CRITERION n: PASS|FAIL`` line with the measured
numbers and then asserts at the agreed tolerances. The sweeps are long
(about half an hour in total on one core); deselect with ``-m "not acceptance"``.
"""

import time

import numpy as np
import pytest

from pwdi import bem, fields, nystrom
from pwdi.algebraic import build_algebraic, separable_coefficients
from pwdi.chebyshev import fejer_rule
from pwdi.experiments import ExperimentConfig, eoc, eoc_fit, run_convergence
from pwdi.geometry import make_sphere, sphere_patches
from pwdi.interpcheck import check_surface
from pwdi.kernels import kernel_eval
from pwdi.mesh import make_trimesh_sphere
from pwdi.planewave import PlanewaveInterpolant
from pwdi.taylor import n_terms

pytestmark = pytest.mark.acceptance

K = ETA = 1.0
NYSTROM_N = [8, 16, 32]
BEM_N = [4, 8, 16, 32]  # cube-sphere subdivisions, 98 to 6146 nodes

# reference errors at N = 32: (far, near)
BM_REFERENCE = {
    ("bm-direct", 2): (4.13e-5, 2.27e-5),
    ("bm-regularized", 2): (1.21e-4, 2.02e-4),
    ("bm-direct", 3): (7.22e-6, 2.08e-5),
    ("bm-regularized", 3): (3.22e-5, 8.29e-5),
}
# reference far errors of the P1 Galerkin solver at h ~ 6.87e-2, M = 1
BEM_REFERENCE = {"bw": 8.96e-4, "bm-regularized": 1.01e-3}


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def fmt(xs):
    return "[" + ", ".join("-" if x is None else f"{x:.3g}" for x in xs) + "]"


def fit(rows, attr="far_error"):
    rows = [r for r in rows if getattr(r, attr) is not None]
    return eoc_fit([r.h for r in rows], [getattr(r, attr) for r in rows])


# --------------------------------------------------------------------------
# shared sweeps
# --------------------------------------------------------------------------
@pytest.fixture(scope="session")
def bw_sweep():
    out = {}
    t0 = time.perf_counter()
    for M in range(4):
        cfg = ExperimentConfig(method="nystrom", equation="bw", M=M, resolutions=NYSTROM_N)
        out[M] = run_convergence(cfg)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="session")
def bem_sweep():
    out = {}
    for eq in ("bw", "bm-regularized"):
        for M in (0, 1):
            cfg = ExperimentConfig(method="bem", equation=eq, M=M, resolutions=BEM_N, max_iter=1000)
            out[eq, M] = run_convergence(cfg)
    return out


# --------------------------------------------------------------------------
def test_criterion_1_interpolation_conditions(capsys):
    field = fields.exact_interior_sources(K)
    lines, ok = [], True
    for interp, orders in (("analytic", (0, 1)), ("algebraic", (0, 1, 2, 3))):
        for M in orders:
            rep = check_surface(sphere_patches(), field, K, ETA, M, interp, n_anchors=50, seed=0)
            good = rep.max_residual < 1e-7 and rep.min_slope >= M + 0.7
            ok &= good
            lines.append(f"{interp} M={M}: residual {rep.max_residual:.1e} slope {rep.min_slope:.2f}")
    report(capsys, 1, ok, "; ".join(lines))


def test_criterion_2_nystrom_bw_sphere(capsys, bw_sweep):
    sweep, elapsed = bw_sweep
    lines, ok = [], True
    for M, rows in sweep.items():
        far, near = fit(rows), fit(rows, "near_error")
        target, slack = (3.0, 0.5) if M <= 1 else (5.0, 0.7)
        near_min = 5.0 - 0.7 if M == 3 else 3.0 - 0.5
        good = abs(far - target) <= slack and near >= near_min and all(r.converged for r in rows)
        ok &= good
        lines.append(f"M={M} far {fmt([r.far_error for r in rows])} eoc {far:.2f} "
                     f"near {fmt([r.near_error for r in rows])} eoc {near:.2f}{'' if good else ' <-'}")
    ok &= elapsed < 600
    report(capsys, 2, ok, f"sweep {elapsed:.0f}s; " + "; ".join(lines))


def test_criterion_3_nystrom_bm_sphere(capsys):
    lines, ok = [], True
    for (eq, M), (far_ref, near_ref) in BM_REFERENCE.items():
        cfg = ExperimentConfig(method="nystrom", equation=eq, M=M, resolutions=[32], max_iter=2000)
        row = run_convergence(cfg)[0]
        good = bool(row.converged) and row.far_error <= 5 * far_ref and row.near_error <= 5 * near_ref
        ok &= good
        lines.append(f"{eq} M={M}: far {row.far_error:.2e} ({row.far_error / far_ref:.1f}x) "
                     f"near {row.near_error:.2e} ({row.near_error / near_ref:.1f}x) it {row.iterations}"
                     f"{'' if good else ' <-'}")
    report(capsys, 3, ok, "; ".join(lines))


def test_criterion_4_bem_sphere(capsys, bem_sweep):
    lines, ok = [], True
    for (eq, M), rows in bem_sweep.items():
        slope = fit(rows)
        good = abs(slope - 2.0) <= 0.3 and all(r.converged for r in rows)
        if M == 1:
            good &= rows[-1].far_error <= 3 * BEM_REFERENCE[eq]
            m0 = bem_sweep[eq, 0]
            good &= all(rows[i].near_error <= m0[i].near_error for i in (-2, -1))
        ok &= good
        lines.append(f"{eq} M={M} dof {rows[-1].dof} h {rows[-1].h:.3g}: far {fmt([r.far_error for r in rows])} "
                     f"eoc {slope:.2f} near {fmt([r.near_error for r in rows])}{'' if good else ' <-'}")
    report(capsys, 4, ok, "; ".join(lines))


def test_criterion_5_gmres_iterations(capsys, bw_sweep):
    sweep, _ = bw_sweep
    its = {M: [r.iterations for r in rows] for M, rows in sweep.items()}
    ok = all(r.converged and r.iterations <= 25 for rows in sweep.values() for r in rows)
    report(capsys, 5, ok, "iterations at N=8,16,32: " + "; ".join(f"M={M} {v}" for M, v in its.items()))


def test_criterion_6_composite_multiscatter(capsys):
    d = [np.cos(np.pi / 4), 0.0, -np.sin(np.pi / 4)]
    cfg = ExperimentConfig(method="multiscatter", geometry="composite", M=1,
                           incident={"kind": "planewave", "direction": d},
                           resolutions=[0.6, 0.42, 0.3, 0.21, 0.11], max_iter=1000)
    rows = run_convergence(cfg)
    slope = fit(rows[:-1])
    ok = abs(slope - 2.0) <= 0.4 and all(r.converged for r in rows)
    report(capsys, 6, ok, f"h {fmt([r.h for r in rows])} far {fmt([r.far_error for r in rows])} "
                          f"eoc {fmt(eoc([r.h for r in rows[:-1]], [r.far_error for r in rows[:-1]]))} fit {slope:.2f}")


# --------------------------------------------------------------------------
# property suite
# --------------------------------------------------------------------------
def _green_identity_gap():
    g = make_sphere(N=6)
    d = np.array([0.0, 0.6, 0.8])
    U = np.exp(1j * K * g.points @ d)
    Un = 1j * K * (g.normals @ d) * U
    p = g.points[17]
    Phi = PlanewaveInterpolant(p[None], d[None, None], np.exp(1j * K * p @ d)[None, None], K)
    mask = np.arange(g.size) != 17
    q, nq = g.points[mask], g.normals[mask]
    kv = kernel_eval(K, p[None], q, ny=nq)
    integrand = (kv["dG_dny"] * (U[mask] - Phi.evaluate(q[None])[0])
                 - kv["G"] * (Un[mask] - Phi.evaluate_normal(q[None], nq[None])[0]))
    return np.abs(integrand).max()


def _separability_gap():
    worst = 0.0
    rng = np.random.default_rng(0)
    x = np.array([[0.3, -1.2, 2.0], [5.0, 1.0, -0.5]])
    for M in range(4):
        jet = sphere_patches()[2].jet(np.array([0.3]), np.array([-0.4]))
        dj = rng.standard_normal((1, n_terms(M))) + 1j * rng.standard_normal((1, n_terms(M)))
        interp = build_algebraic(jet, dj, K, ETA, M)
        phi_l = separable_coefficients(interp)[0]
        d, p = interp.directions[0], interp.anchors[0]
        separated = np.exp(1j * K * x @ d.T) @ (phi_l * np.conj(np.exp(1j * K * d @ p)))
        direct = interp.evaluate(x[None])[0]
        worst = max(worst, np.abs(direct - separated).max() / np.abs(phi_l).sum())
    return worst


def _fejer_gaps():
    sums, exact = [], []
    for N in (4, 9, 16, 33):
        r = fejer_rule(N)
        sums.append(abs(r.weights.sum() - 2.0))
        j = np.arange(N)
        ref = np.where(j % 2 == 0, 2.0 / (j + 1), 0.0)
        exact.append(np.abs(r.weights @ r.nodes[:, None] ** j - ref).max())
    return max(sums), max(exact)


def _kernel_fd_gap():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((20, 3))
    y = x + rng.uniform(0.3, 2.0, (20, 1)) * rng.standard_normal((20, 3))
    nx = rng.standard_normal((20, 3))
    nx /= np.linalg.norm(nx, axis=1, keepdims=True)
    ny = rng.standard_normal((20, 3))
    ny /= np.linalg.norm(ny, axis=1, keepdims=True)
    kv = kernel_eval(K, x, y, nx=nx, ny=ny)
    h = 1e-5
    fd_x = (kernel_eval(K, x + h * nx, y)["G"] - kernel_eval(K, x - h * nx, y)["G"]) / (2 * h)
    fd_y = (kernel_eval(K, x, y + h * ny)["G"] - kernel_eval(K, x, y - h * ny)["G"]) / (2 * h)
    scale = np.abs(kv["G"]).max()
    return max(np.abs(fd_x - kv["dG_dnx"]).max(), np.abs(fd_y - kv["dG_dny"]).max()) / scale


def _linearity_gap():
    g = make_sphere(N=6)
    rng = np.random.default_rng(4)
    gaps = []
    for eq, M in (("bw", 1), ("bm-regularized", 2)):
        op = nystrom.assemble(g, K, ETA, M, eq)
        x = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
        y = rng.standard_normal(g.size)
        a, b = 0.7 - 2j, 1.5j
        gaps.append(np.abs(op(a * x + b * y) - a * op(x) - b * op(y)).max() / np.abs(op(x)).max())
    return max(gaps)


PROBES = np.array([[0.0, 0.0, 0.5], [0.3, 0.3, -0.2], [0.0, -0.5, 0.0], [-0.4, 0.0, 0.1]])


def _extinction_ratios():
    """Interior Green-representation residual against the Neumann-trace error, both relative."""
    ex = fields.exact_interior_sources(K)
    out = {}
    g = make_sphere(N=16)
    data = ex.value(g.points)
    sol = nystrom.solve(g, data, K, ETA, 2, "bw", "algebraic")
    neu = nystrom.apply_bm(g, sol.density, K, ETA, 2, "direct", "algebraic")
    neu_ex = ex.normal_derivative(g.points, g.normals)
    bnd = np.abs(neu - neu_ex).max() / np.abs(neu_ex).max()
    res = np.abs(fields.green_representation(g, data, neu, PROBES, K)).max() / np.abs(data).max()
    out["nystrom N=16 M=2"] = (res, bnd)

    m = make_trimesh_sphere(1.0, n=8)
    sol = bem.solve(m, ex.value(bem.gauss_triple(m).flat_points), K, ETA, 1, "bw")
    nodal = ex.value(m.nodes)
    neu = bem.neumann_trace(m, sol.density, K, ETA, 1)
    neu_ex = ex.normal_derivative(m.nodes, m.nodes)  # unit sphere: the normal is the position
    bnd = np.abs(neu - neu_ex).max() / np.abs(neu_ex).max()
    res = np.abs(bem.extinction_residual(m, sol.density, nodal, PROBES, K, ETA, 1)).max() / np.abs(nodal).max()
    out["bem n=8 M=1"] = (res, bnd)
    return out


def test_criterion_7_property_suite(capsys):
    green = _green_identity_gap()
    sep = _separability_gap()
    fsum, fexact = _fejer_gaps()
    kfd = _kernel_fd_gap()
    lin = _linearity_gap()
    ext = _extinction_ratios()
    checks = {
        "green-identity": green < 1e-14,
        "separability": sep < 1e-12,
        "fejer-sum": fsum < 1e-13,
        "fejer-exactness": fexact < 1e-13,
        "kernel-fd": kfd < 1e-8,
        "linearity": lin < 1e-12,
        "extinction": all(res <= 10 * bnd for res, bnd in ext.values()),
    }
    detail = (f"green {green:.1e} sep {sep:.1e} fejer {fsum:.1e}/{fexact:.1e} kernel-fd {kfd:.1e} "
              f"linear {lin:.1e} extinction "
              + ", ".join(f"{k}: {r:.1e} vs boundary {b:.1e}" for k, (r, b) in ext.items()))
    failed = [k for k, v in checks.items() if not v]
    report(capsys, 7, not failed, detail + (f" failed {failed}" if failed else ""))


def test_criterion_8_cube(capsys):
    d = [np.cos(np.pi / 3), -np.sin(np.pi / 3), 0.0]
    lines, ok = [], True
    for M, target in ((1, 3.0), (2, 5.0)):
        rows = run_convergence(ExperimentConfig(geometry="cube", M=M, resolutions=NYSTROM_N, max_iter=1000))
        smooth = fit(rows)
        rows_pw = run_convergence(ExperimentConfig(geometry="cube", M=M, resolutions=[8, 12, 16, 32], max_iter=1000,
                                                   incident={"kind": "planewave", "direction": d}))
        edge = fit(rows_pw[:-1])
        good = abs(smooth - target) <= 0.6 and abs(edge - 2.0) <= 0.6
        ok &= good
        lines.append(f"M={M} sources {fmt([r.far_error for r in rows])} eoc {smooth:.2f}; planewave "
                     f"{fmt([r.far_error for r in rows_pw[:-1]])} eoc {edge:.2f}{'' if good else ' <-'}")
    report(capsys, 8, ok, "; ".join(lines))
