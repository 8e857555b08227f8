import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hammerfix.gibbs import GibbsModel, analyze, gibbs_coefficients, gibbs_d, h_function, h_function_check
from hammerfix.quad import compute_coefficients
from hammerfix.solver import UNIQUE_BY_SIGN_PATTERN

GRID_AB = (0.1, 0.5, 1.0, 2.0, 10.0)
GRID_K = range(2, 9)

positive = st.floats(min_value=0.01, max_value=100.0, allow_nan=False)


def test_coefficients_k2():
    c = gibbs_coefficients(GibbsModel(1, 1, 2))
    np.testing.assert_allclose(c.a, [1, 1, 1 / 3], atol=1e-15)
    np.testing.assert_allclose(c.b, [1 / 2, 2 / 3, 1 / 4], atol=1e-15)


def test_coefficients_k3():
    c = gibbs_coefficients(GibbsModel(2, 1, 3))
    assert c.a[0] == 2 and c.a[3] == 0.5
    assert c.b[0] == 0.5 and c.b[3] == pytest.approx(0.2, abs=1e-15)


@pytest.mark.parametrize("a, b, k", [(1, 1, 2), (0.1, 10, 5), (2, 0.5, 8)])
def test_coefficients_match_quadrature(a, b, k):
    m = GibbsModel(a, b, k)
    closed = gibbs_coefficients(m)
    quad = compute_coefficients(m.kernel())
    np.testing.assert_allclose(quad.a, closed.a, atol=1e-10)
    np.testing.assert_allclose(quad.b, closed.b, atol=1e-10)


def test_d_k2():
    assert gibbs_d(GibbsModel(1, 1, 2)) == pytest.approx([1 / 3, 3 / 4], abs=1e-15)


@pytest.mark.parametrize("a, b, k", list(itertools.product(GRID_AB, GRID_AB, GRID_K)))
def test_d_formula_matches_coefficient_difference(a, b, k):
    m = GibbsModel(a, b, k)
    np.testing.assert_allclose(gibbs_d(m), gibbs_coefficients(m).d, atol=1e-12)


def test_h_values_k2():
    m = GibbsModel(1, 1, 2)
    assert h_function(m, 1) == pytest.approx(1 / 6)
    assert h_function(m, 2) == pytest.approx(3 / 4)
    assert h_function_check(m)[1]


def test_h_negative_start_still_increasing():
    m = GibbsModel(1, 1, 10)
    assert h_function(m, 1) < 0
    h_min, mono = h_function_check(m)
    assert h_min > 0 and mono


def test_h_check_needs_two_samples():
    with pytest.raises(ValueError):
        h_function_check(GibbsModel(1, 1, 3), 1)


@settings(max_examples=200, deadline=None)
@given(positive, positive, st.integers(1, 30))
def test_h_derivative_positive(a, b, k):
    h_min, mono = h_function_check(GibbsModel(a, b, k))
    assert h_min > 0 and mono


def test_d_not_always_nondecreasing():
    # binomial weights break monotonicity of d even though h is increasing
    d = gibbs_d(GibbsModel(1, 1, 4))
    assert d == pytest.approx([-1 / 3, 1 / 2, 6 / 5, 5 / 6])
    assert d[2] > d[3]


@settings(max_examples=200, deadline=None)
@given(positive, positive, st.integers(1, 30))
def test_d_sign_pattern_always_holds(a, b, k):
    # sign(d_i) = sign(h(i)), and h increases: nonpositive block then nonnegative block
    d = gibbs_d(GibbsModel(a, b, k))
    signs = [np.sign(v) for v in d]
    first_pos = next((i for i, s in enumerate(signs) if s > 0), len(signs))
    assert all(s >= 0 for s in signs[first_pos:])


@settings(max_examples=100, deadline=None)
@given(positive, positive, st.integers(2, 10), st.floats(min_value=0.01, max_value=100.0))
def test_scaling_preserves_d_signs(a, b, k, s):
    d0 = gibbs_d(GibbsModel(a, b, k))
    d1 = gibbs_d(GibbsModel(s * a, s * b, k))
    for u, v in zip(d0, d1):
        assert v == pytest.approx(s * u, rel=1e-12, abs=1e-300)
        if abs(u) > 1e-12 * max(a, b) * math.comb(k, k // 2):
            assert np.sign(u) == np.sign(v)


def test_analyze_k2():
    rep = analyze(GibbsModel(1, 1, 2))
    assert rep.n_tigm == 1
    assert (rep.fixed_point.x0, rep.fixed_point.y0) == pytest.approx((0.59436, 0.34057), abs=1e-4)
    assert rep.classification == UNIQUE_BY_SIGN_PATTERN
    assert rep.quadrature_gap <= 1e-10


def test_analyze_strong_a():
    assert analyze(GibbsModel(10, 0.1, 5)).n_tigm == 1


def test_analyze_k1_reports_note_only():
    rep = analyze(GibbsModel(1, 1, 1))
    assert rep.n_tigm is None and rep.fixed_point is None
    assert "k >= 2" in rep.note


@pytest.mark.parametrize("a, b", [(0, 1), (1, 0), (-1, 1)])
def test_model_parameter_guard(a, b):
    with pytest.raises(ValueError):
        GibbsModel(a, b, 2)


def test_model_k_guard():
    with pytest.raises(ValueError):
        GibbsModel(1, 1, 2.5)
    with pytest.raises(ValueError):
        GibbsModel(1, 1, 2, beta=0)


def test_beta_does_not_enter_kernel():
    assert GibbsModel(1, 2, 3, beta=0.5).kernel() == GibbsModel(1, 2, 3, beta=7).kernel()


def test_grid_uniqueness_and_sign_pattern():
    for a, b, k in itertools.product(GRID_AB, GRID_AB, GRID_K):
        rep = analyze(GibbsModel(a, b, k))
        assert rep.n_tigm == 1
        assert rep.d_sign_pattern
        assert rep.classification == UNIQUE_BY_SIGN_PATTERN
        assert rep.fixed_point.residual_sup <= 1e-6


def test_report_to_dict():
    d = analyze(GibbsModel(1, 1, 2)).to_dict()
    assert d["n_tigm"] == 1 and d["model"] == {"a": 1, "b": 1, "k": 2, "beta": 1.0}
