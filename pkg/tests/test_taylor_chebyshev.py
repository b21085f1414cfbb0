import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwdi.chebyshev import (
    cheb_coefficients,
    cheb_values,
    differentiation_matrix,
    evaluate_jet,
    fejer_rule,
    spectral_derivatives,
    tensor_coefficients,
)
from pwdi.taylor import TSeries, multi_indices, n_terms

finite = st.floats(-1.5, 1.5, allow_nan=False)


def test_multi_indices_graded():
    assert multi_indices(2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert n_terms(3) == len(multi_indices(3)) == 10


@given(finite, finite)
@settings(max_examples=30, deadline=None)
def test_series_derivatives_of_exp_product(a, b):
    # f = exp(x) sin(y): d^(i,j) f = exp(x) * sin^(j)(y)
    x = TSeries.variable(np.array(a), 0, 3)
    y = TSeries.variable(np.array(b), 1, 3)
    f = x.exp() * y.sin()
    sin_d = [np.sin(b), np.cos(b), -np.sin(b), -np.cos(b)]
    expect = [np.exp(a) * sin_d[j] for _, j in multi_indices(3)]
    assert np.allclose(f.derivatives(), expect, rtol=1e-12, atol=1e-12)


@given(st.floats(0.2, 3.0), finite)
@settings(max_examples=30, deadline=None)
def test_series_sqrt_reciprocal(a, b):
    x = TSeries.variable(np.array(a), 0, 3)
    y = TSeries.variable(np.array(b), 1, 3)
    s = x * x + y * y * 0.0 + 1.0
    r = s.sqrt() * s.sqrt() - s
    assert np.allclose(r.c, 0, atol=1e-12)
    q = (s / s) - 1.0
    assert np.allclose(q.c, 0, atol=1e-12)


def test_series_degree_mismatch():
    with pytest.raises(ValueError):
        TSeries(np.zeros(4), 2)


@pytest.mark.parametrize("N", [1, 2, 5, 8, 16, 33])
def test_fejer_weight_sum(N):
    assert abs(fejer_rule(N).weights.sum() - 2.0) < 1e-14


@given(st.integers(2, 40), st.data())
@settings(max_examples=30, deadline=None)
def test_fejer_exact_to_degree_n_minus_1(N, data):
    deg = data.draw(st.integers(0, N - 1))
    r = fejer_rule(N)
    exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
    assert abs(np.sum(r.weights * r.nodes**deg) - exact) < 1e-13


def test_fejer_rejects_empty():
    with pytest.raises(ValueError):
        fejer_rule(0)


def test_dct_round_trip(rng):
    v = rng.standard_normal((7, 3))
    assert np.allclose(cheb_values(cheb_coefficients(v)), v, atol=1e-14)


def test_differentiation_matrix_polynomial():
    N = 9
    t = fejer_rule(N).nodes
    D = differentiation_matrix(N)
    assert np.allclose(D @ t**5, 5 * t**4, atol=1e-12)
    D2 = differentiation_matrix(N, 2)
    assert np.allclose(D2 @ t**5, 20 * t**3, atol=1e-11)


def test_spectral_derivatives_tensor():
    N = 8
    t = fejer_rule(N).nodes
    X, Y = np.meshgrid(t, t, indexing="ij")
    f = X**3 * Y**2 + X * Y
    d = spectral_derivatives(f, 2)
    expect = [f, 3 * X**2 * Y**2 + Y, 2 * X**3 * Y + X, 6 * X * Y**2, 6 * X**2 * Y + 1, 2 * X**3]
    assert np.allclose(d, expect, atol=1e-11)


def test_evaluate_jet_off_grid():
    N = 8
    t = fejer_rule(N).nodes
    X, Y = np.meshgrid(t, t, indexing="ij")
    c = tensor_coefficients(np.sin(X) * np.cos(Y))
    j = evaluate_jet(c, 0.3, -0.2, 1)
    assert np.allclose(j, [np.sin(0.3) * np.cos(0.2), np.cos(0.3) * np.cos(0.2), np.sin(0.3) * np.sin(0.2)], atol=1e-6)
