import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nslasalle.field import (FieldDefinitionError, OnDiscontinuityError, PiecewiseField,
                             adjacent_keys, evaluate_field, filippov_map, key_to_pattern,
                             pattern_to_key, region_of, validate_field)


def test_patterns():
    assert pattern_to_key("+-0") == (1, -1, 0)
    assert key_to_pattern((1, -1, 0)) == "+-0"
    assert sorted(adjacent_keys((0, 1))) == [(-1, 1), (1, 1)]
    assert len(adjacent_keys((0, 0))) == 4


def test_sign_field_examples(sign_field):
    assert evaluate_field(sign_field, [2.0])[0] == -1.0
    assert evaluate_field(sign_field, [-0.5])[0] == 1.0
    with pytest.raises(OnDiscontinuityError):
        evaluate_field(sign_field, [0.0])
    K = filippov_map(sign_field, [0.0])
    assert K.interval().lower == -1.0 and K.interval().upper == 1.0
    assert filippov_map(sign_field, [1e-10]).interval().width == 2.0


def test_adaptive_on_surface(adaptive_field):
    K = filippov_map(adaptive_field, [0.0, 0.5])
    expected = {(-0.5, 0.0), (1.5, 0.0)}
    assert {tuple(v) for v in K.vertices} == expected


def test_two_surfaces_hull():
    F = PiecewiseField.from_strings(2, ["x1", "x2"], {
        "++": ["-1", "-1"], "+-": ["-1", "1"], "-+": ["1", "-1"], "--": ["1", "1"]})
    assert len(filippov_map(F, [0.0, 0.0]).vertices) == 4
    assert len(filippov_map(F, [0.0, 1.0]).vertices) == 2
    assert filippov_map(F, [0.0, 0.0]).contains([0.0, 0.0])


def test_definition_errors():
    with pytest.raises(FieldDefinitionError, match=r"missing region '\+-'"):
        PiecewiseField.from_strings(2, ["x1", "x2"], {
            "++": ["0", "0"], "-+": ["0", "0"], "--": ["0", "0"]})
    with pytest.raises(FieldDefinitionError, match="components"):
        PiecewiseField.from_strings(2, ["x1"], {"+": ["0"], "-": ["0", "0"]})
    with pytest.raises(FieldDefinitionError):
        PiecewiseField.from_strings(1, ["x1"], {"++": "0", "-": "0"})
    with pytest.raises(ValueError):
        region_of(PiecewiseField.from_strings(1, ["x1"], {"+": "0", "-": "0"}), [0.0], 0.0, 0.0)


def test_validate_field(adaptive_field):
    report = validate_field(adaptive_field, [(-2, 2), (-2, 2)], [0.0, 1.0])
    assert report.passed
    assert report.max_norm == pytest.approx(np.hypot(5.0, 2.0))
    blowup = PiecewiseField.from_strings(1, ["x1"], {"+": "-1 - t^2", "-": "1"})
    assert not validate_field(blowup, [(-1, 1)], [0.0, 5.0]).passed


SMOOTH_POINTS = st.tuples(st.floats(-2, 2), st.floats(-2, 2)).filter(lambda p: abs(p[0]) > 1e-6)


@settings(max_examples=200, deadline=None)
@given(SMOOTH_POINTS)
def test_consistency_off_surfaces(adaptive_field, p):
    K = filippov_map(adaptive_field, p)
    assert K.is_singleton()
    np.testing.assert_allclose(K.point(), evaluate_field(adaptive_field, p), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e-6, 1e-6), st.floats(1e-9, 1e-7), st.floats(1.0, 10.0))
def test_monotone_in_tolerance(sign_field, x, tol, factor):
    small = filippov_map(sign_field, [x], 0.0, tol)
    large = filippov_map(sign_field, [x], 0.0, tol * factor)
    assert large.contains_set(small)


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3))
def test_odd_symmetry(sign_field, x):
    a = filippov_map(sign_field, [x]).interval()
    b = filippov_map(sign_field, [-x]).interval()
    assert (a.lower, a.upper) == (-b.upper, -b.lower)


@settings(max_examples=100, deadline=None)
@given(st.floats(-2, 2), st.floats(0, 1))
def test_hull_contains_convex_combinations(adaptive_field, theta, lam):
    x = [0.0, theta]
    fp = adaptive_field.piece_value((1,), x, 0.0)
    fm = adaptive_field.piece_value((-1,), x, 0.0)
    K = filippov_map(adaptive_field, x)
    assert K.contains(lam * fp + (1 - lam) * fm, tol=1e-12)
    assert not K.contains(fp + 0.1 * (fp - fm), tol=1e-3)
