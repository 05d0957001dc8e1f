import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nslasalle.expr import (EvaluationError, ParseError, UnknownIdentifierError, VariableIndexError,
                            compile_vector, differentiate, evaluate, gradient, parse)


@pytest.mark.parametrize("text, x, t, expected", [
    ("-x1 + 2*x2", [1.0, 3.0], 0.0, 5.0),
    ("x1^2 + x2**3", [2.0, -1.0], 0.0, 3.0),
    ("-x1^2", [3.0, 0.0], 0.0, -9.0),
    ("x1 / (1 + t)", [4.0, 0.0], 1.0, 2.0),
    ("sin(x1) + cos(x2)", [0.0, 0.0], 0.0, 1.0),
    ("exp(t) * sqrt(x2)", [0.0, 4.0], 0.0, 2.0),
    ("x1^(-1)", [4.0, 0.0], 0.0, 0.25),
    ("2 - 3 - 4", [0.0, 0.0], 0.0, -5.0),
    ("8 / 4 / 2", [0.0, 0.0], 0.0, 1.0),
])
def test_evaluate_examples(text, x, t, expected):
    assert evaluate(parse(text, 2), x, t) == pytest.approx(expected, abs=1e-15)


def test_parameters():
    e = parse("k*x1 + theta", 1, ["k", "theta"])
    assert e.parameters() == {"k", "theta"}
    assert evaluate(e, [2.0], 0.0, {"k": 3.0, "theta": 1.0}) == 7.0


def test_parse_error_offsets():
    with pytest.raises(ParseError) as info:
        parse("x1 +", 1)
    assert info.value.diagnostic.offset == 4
    with pytest.raises(VariableIndexError):
        parse("x3", 2)
    with pytest.raises(UnknownIdentifierError):
        parse("y + 1", 1)
    with pytest.raises(ParseError):
        parse("abs(x1)", 1)
    with pytest.raises(ParseError):
        parse("x1 ^ 1.5", 1)
    with pytest.raises(ParseError):
        parse("(x1", 1)
    with pytest.raises(ParseError):
        parse("", 1)


def test_evaluation_errors():
    with pytest.raises(EvaluationError):
        evaluate(parse("1 / x1", 1), [0.0])
    with pytest.raises(EvaluationError):
        evaluate(parse("sqrt(x1)", 1), [-1.0])
    with pytest.raises(EvaluationError):
        parse("1/x1", 1).compile()([0.0], 0.0)


def test_derivative_examples():
    e = parse("tanh(x1)", 1)
    d = differentiate(e, "x1")
    for v in (-2.0, 0.0, 0.3):
        assert evaluate(d, [v]) == pytest.approx(1 - math.tanh(v) ** 2, abs=1e-15)
    assert str(differentiate(parse("x1^3", 1), "x1")) == "3*x1^2"
    assert evaluate(differentiate(parse("t*x1", 1), "t"), [5.0], 2.0) == 5.0
    g = gradient(parse("x1*x2 + x2^2", 2), 2)
    assert [evaluate(c, [1.0, 2.0]) for c in g] == [2.0, 5.0]


def test_numpy_backend_matches_math():
    e = parse("x1*sin(x2) - t*x1^2 + 3", 2)
    X = np.random.default_rng(1).normal(size=(2, 50))
    vec = e.compile(backend="numpy")(X, 0.7)
    scalar = [e.compile()(X[:, j], 0.7) for j in range(50)]
    np.testing.assert_allclose(vec, scalar, rtol=0, atol=1e-14)
    const = parse("2", 2).compile(backend="numpy")(X, 0.0)
    assert const.shape == (50,)


def test_compile_vector():
    f = compile_vector([parse("x1", 2), parse("x1*x2", 2)])
    np.testing.assert_array_equal(f([2.0, 3.0], 0.0), [2.0, 6.0])
    assert compile_vector([])([1.0], 0.0).shape == (0,)


# ---- generated expressions ----

LEAVES = st.one_of(st.sampled_from(["x1", "x2", "t", "k"]),
                   st.integers(0, 9).map(str),
                   st.floats(0.1, 5, allow_nan=False).map(lambda v: f"{v:.3f}"))


def _combine(children):
    unary = st.tuples(st.sampled_from(["sin", "cos", "tanh", "-"]), children).map(
        lambda p: f"-({p[1]})" if p[0] == "-" else f"{p[0]}({p[1]})")
    binary = st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(
        lambda p: f"({p[0]}) {p[1]} ({p[2]})")
    powered = st.tuples(children, st.integers(0, 3)).map(lambda p: f"({p[0]})^{p[1]}")
    return st.one_of(unary, binary, powered)


EXPRS = st.recursive(LEAVES, _combine, max_leaves=8)
POINTS = st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 3))


@settings(max_examples=150, deadline=None)
@given(EXPRS, POINTS)
def test_print_parse_round_trip(text, point):
    e = parse(text, 2, ["k"])
    again = parse(str(e), 2, ["k"])
    assert str(again) == str(e)
    x, t = list(point[:2]), point[2]
    p = {"k": 1.3}
    assert evaluate(again, x, t, p) == pytest.approx(evaluate(e, x, t, p), rel=1e-12, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(EXPRS, POINTS, st.sampled_from(["x1", "x2", "t"]))
def test_derivative_matches_finite_difference(text, point, wrt):
    e = parse(text, 2, ["k"])
    d = differentiate(e, wrt)
    p = {"k": 1.3}
    x, t = np.array(point[:2]), point[2]
    h = 1e-5
    if wrt == "t":
        fd = (evaluate(e, x, t + h, p) - evaluate(e, x, t - h, p)) / (2 * h)
    else:
        i = int(wrt[1]) - 1
        step = np.zeros(2)
        step[i] = h
        fd = (evaluate(e, x + step, t, p) - evaluate(e, x - step, t, p)) / (2 * h)
    exact = evaluate(d, x, t, p)
    assert exact == pytest.approx(fd, rel=1e-4, abs=1e-4 * (1 + abs(fd)))


@settings(max_examples=100, deadline=None)
@given(EXPRS, EXPRS, st.floats(-3, 3), st.floats(-3, 3), POINTS)
def test_derivative_is_linear(a_text, b_text, alpha, beta, point):
    a, b = parse(a_text, 2, ["k"]), parse(b_text, 2, ["k"])
    combo = parse(f"{alpha!r}*({a_text}) + {beta!r}*({b_text})", 2, ["k"])
    p, x, t = {"k": 1.3}, list(point[:2]), point[2]
    lhs = evaluate(differentiate(combo, "x1"), x, t, p)
    rhs = alpha * evaluate(differentiate(a, "x1"), x, t, p) \
        + beta * evaluate(differentiate(b, "x1"), x, t, p)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)
