import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwdi.algebraic import (
    GRID_SHAPES,
    SOLVER_SHAPES,
    RankDeficiencyError,
    build_algebraic,
    build_C,
    direction_grid,
    separable_coefficients,
    solve_coefficients,
)
from pwdi.analytic import analytic_expansions, build_analytic
from pwdi.fields import exact_interior_sources, planewave_incident
from pwdi.geometry import bean_patches, sphere_patches
from pwdi.interpcheck import check_anchors, check_surface
from pwdi.planewave import PlanewaveInterpolant
from pwdi.taylor import n_terms

K, ETA = 1.0, 1.0


@pytest.fixture(scope="module")
def src_field():
    return exact_interior_sources(K)


# ---------------------------------------------------------------- analytic
@pytest.mark.parametrize("patches", [sphere_patches(), bean_patches()], ids=["sphere", "bean"])
@pytest.mark.parametrize("M", [0, 1])
def test_analytic_interpolation_conditions(patches, M, src_field):
    rep = check_surface(patches, src_field, K, ETA, M, "analytic", n_anchors=20, seed=3)
    assert rep.max_residual < 1e-10
    assert rep.min_slope > M + 0.7


def test_analytic_rejects_high_order():
    jet = sphere_patches()[0].jet(np.array([0.1]), np.array([0.2]))
    with pytest.raises(ValueError):
        analytic_expansions(jet, K, 2)


def test_analytic_uses_fourteen_directions_at_order_one():
    jet = sphere_patches()[0].jet(np.array([0.1]), np.array([0.2]))
    exp = analytic_expansions(jet, K, 1)
    assert exp.directions.shape == (1, 14, 3)
    assert np.allclose(np.linalg.norm(exp.directions, axis=-1), 1)


def test_order_zero_leaves_gradient_mismatch(src_field):
    # M=0 matches values only: the first-derivative residual is O(1)
    rep = check_anchors(sphere_patches()[1], [0.2], [-0.1], src_field, K, ETA, 0, "analytic")
    assert rep.value_residual[0, 0] < 1e-14
    assert rep.value_residual[0, 1] > 1e-2


def test_evaluate_normal_is_gradient_projection(src_field):
    jet = sphere_patches()[2].jet(np.array([0.3]), np.array([-0.4]))
    dj = np.array([[1.0, 0.5 - 0.2j, -0.3j]])
    I = build_analytic(jet, dj, K, ETA, 1)
    q = np.array([[[0.1, 0.9, 0.2]]])
    n = np.array([[[0.0, 1.0, 0.0]]])
    h = 1e-5
    fd = (I.evaluate(q + h * n) - I.evaluate(q - h * n)) / (2 * h)
    assert np.allclose(I.evaluate_normal(q, n), fd, rtol=1e-8)


# ---------------------------------------------------------------- algebraic
@pytest.mark.parametrize("M", [0, 1, 2, 3])
def test_direction_grid_sizes(M):
    g = direction_grid(M)
    assert g.L == np.prod(GRID_SHAPES[M])
    assert np.allclose(np.linalg.norm(g.directions, axis=1), 1)


def test_direction_grid_rejects_too_few():
    with pytest.raises(ValueError):
        direction_grid(2, (2, 2))
    with pytest.raises(ValueError):
        direction_grid(4)


@pytest.mark.parametrize("M", [0, 1, 2, 3])
def test_build_C_shape_and_first_rows(M):
    jet = sphere_patches()[0].jet(np.array([0.1, -0.3]), np.array([0.2, 0.5]))
    g = direction_grid(M, SOLVER_SHAPES[M])
    C = build_C(jet, g, K, M)
    N = (M + 1) * (M + 2)
    assert C.shape == (2, N, g.L)
    assert np.allclose(C[:, 0], 1)
    assert np.allclose(C[:, N // 2], 1j * K * np.einsum("pi,li->pl", jet.normal, g.directions))


def test_six_by_five_lattice_loses_rank_at_order_three():
    jet = sphere_patches()[0].jet(np.array([0.1]), np.array([0.2]))
    C = build_C(jet, direction_grid(3), K, 3)[0]
    s = np.linalg.svd(C, compute_uv=False)
    assert s[-1] / s[0] < 1e-12
    C7 = build_C(jet, direction_grid(3, SOLVER_SHAPES[3]), K, 3)[0]
    s7 = np.linalg.svd(C7, compute_uv=False)
    assert s7[-1] / s7[0] > 1e-6


@pytest.mark.parametrize("M", [0, 1, 2, 3])
def test_solve_coefficients_is_right_inverse(M):
    jet = bean_patches()[4].jet(np.array([0.25]), np.array([-0.6]))
    C = build_C(jet, direction_grid(M, SOLVER_SHAPES[M]), 1.7, M)
    a, b = solve_coefficients(C)
    Cd = np.concatenate([np.swapaxes(a, -1, -2), np.swapaxes(b, -1, -2)], axis=-1)
    assert np.abs(C @ Cd - np.eye(C.shape[-2])).max() < 1e-8


def test_solve_coefficients_rank_deficiency():
    C = np.ones((1, 4, 6), dtype=complex)
    with pytest.raises(RankDeficiencyError):
        solve_coefficients(C)
    with pytest.raises(RankDeficiencyError):
        solve_coefficients(np.ones((1, 6, 4), dtype=complex))


@pytest.mark.parametrize("patches", [sphere_patches(), bean_patches()], ids=["sphere", "bean"])
@pytest.mark.parametrize("M", [0, 1, 2, 3])
def test_algebraic_interpolation_conditions(patches, M, src_field):
    rep = check_surface(patches, src_field, K, ETA, M, "algebraic", n_anchors=20, seed=5)
    assert rep.max_residual < 1e-7
    assert rep.min_slope > M + 0.7


def test_interpolation_with_planewave_density():
    f = planewave_incident(2.0, [0.0, 0.6, 0.8])
    rep = check_surface(bean_patches(), f, 2.0, 0.5, 2, "algebraic", n_anchors=10)
    assert rep.max_residual < 1e-8


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.integers(0, 5), st.integers(0, 3))
@settings(max_examples=15, deadline=None)
def test_separable_identity(a, b, face, M):
    jet = sphere_patches()[face].jet(np.array([a]), np.array([b]))
    rng = np.random.default_rng(0)
    dj = rng.standard_normal((1, n_terms(M))) + 1j * rng.standard_normal((1, n_terms(M)))
    I = build_algebraic(jet, dj, K, ETA, M)
    phi_l = separable_coefficients(I)[0]
    d = I.directions[0]
    p = I.anchors[0]
    x = np.array([[0.3, -1.2, 2.0], [5.0, 1.0, -0.5]])
    w_p = np.exp(1j * K * d @ p)
    W_x = np.exp(1j * K * x @ d.T)
    direct = I.evaluate(x[None])[0]
    separated = W_x @ (phi_l * np.conj(w_p))
    assert np.allclose(direct, separated, rtol=1e-12, atol=1e-12 * np.abs(phi_l).sum())


def test_separable_requires_shared_directions():
    jet = sphere_patches()[0].jet(np.array([0.1, -0.5]), np.array([0.2, 0.4]))
    I = build_analytic(jet, np.array([[1.0, 0, 0], [0.5, 0, 0]]), K, ETA, 1)
    with pytest.raises(ValueError):
        separable_coefficients(I)


def test_green_identity_zero_integrand():
    # when the interpolant reproduces the planewave density and its normal
    # derivative exactly, the regularized combined-field integrand vanishes
    from pwdi.geometry import make_sphere
    from pwdi.kernels import kernel_eval

    g = make_sphere(N=6)
    d = np.array([0.0, 0.6, 0.8])
    U = np.exp(1j * K * g.points @ d)
    Un = 1j * K * (g.normals @ d) * U
    p = g.points[17]
    Phi = PlanewaveInterpolant(p[None], d[None, None], np.exp(1j * K * p @ d)[None, None], K)
    mask = np.arange(g.size) != 17
    q, nq = g.points[mask], g.normals[mask]
    kv = kernel_eval(K, p[None], q, ny=nq)
    Phi_q = Phi.evaluate(q[None])[0]
    Phin_q = Phi.evaluate_normal(q[None], nq[None])[0]
    integrand = kv["dG_dny"] * (U[mask] - Phi_q) - kv["G"] * (Un[mask] - Phin_q)
    assert np.abs(integrand).max() < 1e-14
