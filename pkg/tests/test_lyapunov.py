import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nslasalle.expr import differentiate, evaluate, gradient, parse
from nslasalle.field import PiecewiseField
from nslasalle.lyapunov import (ComparisonTriple, PiecewiseScalar, check_bounds, check_regularity,
                                clarke_gradient, directional_derivative,
                                generalized_directional_derivative, setvalued_derivative)


@pytest.fixture(scope="module")
def neg_abs():
    return PiecewiseScalar.from_strings(1, {"+": "-x1", "-": "x1"}, ["x1"])


@pytest.fixture(scope="module")
def quad():
    return PiecewiseScalar.from_strings(2, "0.5*(x1^2 + x2^2)")


def test_abs_value_and_clarke_gradient(abs_V):
    assert abs_V([-3.0]) == 3.0
    G = clarke_gradient(abs_V, [0.0])
    assert {tuple(v) for v in G.vertices} == {(-1.0, 0.0), (1.0, 0.0)}
    assert clarke_gradient(abs_V, [2.0]).is_singleton()


def test_directional_derivatives(abs_V, neg_abs):
    assert directional_derivative(abs_V, [0.0], 0.0, [1.0]).value == pytest.approx(1.0, abs=1e-9)
    assert directional_derivative(abs_V, [0.0], 0.0, [-1.0]).value == pytest.approx(1.0, abs=1e-9)
    gen = generalized_directional_derivative(neg_abs, [0.0], 0.0, [1.0])
    assert gen.value == pytest.approx(1.0, abs=1e-6)
    assert gen.consistent
    assert directional_derivative(neg_abs, [0.0], 0.0, [1.0]).value == pytest.approx(-1.0, abs=1e-9)
    with pytest.raises(ValueError):
        directional_derivative(abs_V, [0.0], 0.0, [0.0])


def test_regularity_classifier(abs_V, neg_abs, quad):
    assert check_regularity(abs_V, [0.0]).regular is True
    assert check_regularity(neg_abs, [0.0]).regular is False
    assert check_regularity(quad, [0.3, -1.0]).regular is True


def test_setvalued_derivative_sign(abs_V, sign_field):
    at0 = setvalued_derivative(abs_V, sign_field, [0.0])
    assert at0.lower == pytest.approx(0.0, abs=1e-9) and at0.upper == pytest.approx(0.0, abs=1e-9)
    at2 = setvalued_derivative(abs_V, sign_field, [2.0])
    assert at2.is_singleton() and at2.lower == pytest.approx(-1.0, abs=1e-9)


def test_setvalued_derivative_adaptive_surface(quad, adaptive_field):
    d = setvalued_derivative(quad, adaptive_field, [0.0, 0.7])
    assert d.is_singleton() and d.lower == pytest.approx(0.0, abs=1e-12)


def test_time_dependent_candidate(sign_field):
    V = PiecewiseScalar.from_strings(1, "exp(-t)*x1^2")
    d = setvalued_derivative(V, sign_field, [1.0], 0.5)
    expected = np.exp(-0.5) * (2 * 1.0 * -1.0) - np.exp(-0.5) * 1.0
    assert d.lower == pytest.approx(expected, abs=1e-12)


def test_continuity_check():
    good = PiecewiseScalar.from_strings(1, {"+": "x1", "-": "-x1"}, ["x1"])
    assert good.check_continuity([[0.3], [-0.2]]).passed
    bad = PiecewiseScalar.from_strings(1, {"+": "x1 + 1", "-": "-x1"}, ["x1"])
    assert not bad.check_continuity([[0.3]]).passed


def test_bounds_and_definiteness():
    V = PiecewiseScalar.from_strings(1, "0.5*x1^2")
    ok = ComparisonTriple.from_strings(1, "0.4*x1^2", "0.6*x1^2", "x1^2")
    xs = np.linspace(-2, 2, 41)[:, None]
    samples = [(x, 0.0) for x in xs]
    assert check_bounds(V, ok, samples).passed
    assert ok.check_definiteness(xs).passed
    bad = ComparisonTriple.from_strings(1, "0.6*x1^2", "0.6*x1^2", "x1^2 + 0.5")
    assert not check_bounds(V, bad, samples).passed
    report = bad.check_definiteness(xs)
    assert not report.passed
    assert any(f[0] == "W" for f in report.failures)


SMOOTH = st.sampled_from(["0.5*(x1^2 + x2^2)", "x1^2 + x1*x2 + x2^2", "sin(x1) + x2^4",
                          "exp(-t)*(x1^2 + 2*x2^2)", "cos(x1*x2) + t*x1"])
PTS = st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 3))


@settings(max_examples=60, deadline=None)
@given(SMOOTH, PTS)
def test_clarke_gradient_of_smooth_is_exact(adaptive_field, text, p):
    V = PiecewiseScalar.from_strings(2, text)
    x, t = list(p[:2]), p[2]
    G = clarke_gradient(V, x, t)
    assert G.is_singleton()
    e = parse(text, 2)
    expected = [evaluate(g, x, t) for g in gradient(e, 2)]
    np.testing.assert_allclose(G.point()[:2], expected, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(SMOOTH, PTS.filter(lambda p: abs(p[0]) > 1e-6))
def test_chain_rule_at_smooth_points(adaptive_field, text, p):
    V = PiecewiseScalar.from_strings(2, text)
    e = parse(text, 2)
    x, t = list(p[:2]), p[2]
    f = adaptive_field.piece_value((1 if x[0] > 0 else -1,), x, t)
    grad = [evaluate(g, x, t) for g in gradient(e, 2)]
    expected = float(np.dot(grad, f)) + evaluate(differentiate(e, "t"), x, t)
    d = setvalued_derivative(V, adaptive_field, x, t)
    assert d.is_singleton()
    assert d.lower == pytest.approx(expected, abs=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), st.sampled_from([[1, 0], [0, 1], [1, 1], [-1, 2]]))
def test_regular_candidates_generalized_equals_one_sided(x, v):
    V = PiecewiseScalar.from_strings(2, "x1^2 + x1*x2 + 2*x2^2")
    one = directional_derivative(V, x, 0.0, v)
    gen = generalized_directional_derivative(V, x, 0.0, v)
    assert gen.value >= one.value - 1e-6
    assert gen.value == pytest.approx(one.value, abs=1e-6)


def test_sum_of_smooth_is_regular():
    Va, Vb = "x1^2", "sin(x1*x2)"
    V = PiecewiseScalar.from_strings(2, f"{Va} + {Vb}")
    for x in ([0.0, 0.0], [0.5, -0.3], [1.0, 2.0]):
        assert check_regularity(V, x).regular is True


def test_nesting_under_grid_refinement():
    # nonsmooth V with a 4-vertex Clarke gradient; nested grids (n, 2n-1) never enlarge the result
    V = PiecewiseScalar.from_strings(2, {"++": "x1 + x2", "+-": "x1 - x2", "-+": "-x1 + x2",
                                         "--": "-x1 - x2"}, ["x1", "x2"])
    F = PiecewiseField.from_strings(2, ["x1 - x2"], {"+": ["-1", "0.5"], "-": ["0.3", "-1"]})
    for x in ([0.0, 0.0], [1e-12, 0.0], [0.5, 0.5]):
        coarse = setvalued_derivative(V, F, x, xi_resolution=5)
        fine = setvalued_derivative(V, F, x, xi_resolution=9)
        finer = setvalued_derivative(V, F, x, xi_resolution=17)
        for a, b in ((coarse, fine), (fine, finer)):
            assert b.lower >= a.lower - 1e-12 and b.upper <= a.upper + 1e-12
