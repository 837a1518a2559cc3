import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import brute_hausdorff
from parnet.bspline import BSplineCurve, KnotVector
from parnet.exceptions import InvalidArgumentError
from parnet.geometry import (
    arclen,
    curvature,
    curve_hausdorff,
    directed_hausdorff,
    hausdorff,
    minmax_normalize,
    total_curvature,
)

point_clouds = arrays(np.float64, st.tuples(st.integers(1, 25), st.just(2)),
                      elements=st.floats(-100, 100))


def circle(radius, count, turns=1.0):
    a = np.linspace(0, 2 * np.pi * turns, count)
    return radius * np.column_stack([np.cos(a), np.sin(a)])


def test_curvature_collinear_is_zero():
    p = np.column_stack([np.linspace(0, 1, 9), 3 * np.linspace(0, 1, 9)])
    np.testing.assert_array_equal(curvature(p), 0.0)


def test_curvature_on_circle_radius_two():
    k = curvature(circle(2.0, 40, turns=0.75))
    np.testing.assert_allclose(k, 0.5, rtol=1e-12)
    # clockwise traversal flips the sign
    np.testing.assert_allclose(curvature(circle(2.0, 40, 0.75)[::-1]), -0.5, rtol=1e-12)


def test_curvature_degenerate_and_endpoints():
    p = np.array([[0, 0], [1, 0], [1, 0], [2, 1], [3, 3]], dtype=float)
    k = curvature(p)
    assert np.all(np.isfinite(k))
    assert k[1] == 0.0 and k[2] == 0.0
    assert k[0] == k[1] and k[-1] == k[-2]
    with pytest.raises(InvalidArgumentError):
        curvature(p[:2])


def test_curvature_rigid_and_scale(rng):
    p = rng.normal(size=(30, 2))
    a = 0.7
    R = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    np.testing.assert_allclose(curvature(p @ R.T + [5, -3]), curvature(p), atol=1e-9)
    np.testing.assert_allclose(curvature(3.0 * p), curvature(p) / 3.0, rtol=1e-12)


def test_total_curvature_examples():
    line = np.column_stack([np.linspace(0, 5, 20), np.zeros(20)])
    assert total_curvature(line) == 0.0
    assert total_curvature(circle(3.0, 4000)) == pytest.approx(2 * np.pi, rel=0.01)
    p = circle(1.0, 30, 0.4)
    k = curvature(p)
    assert total_curvature(p, 2 * k) == pytest.approx(2 * total_curvature(p, k), rel=1e-14)
    with pytest.raises(InvalidArgumentError):
        total_curvature(p, k[:-1])


def test_total_curvature_trapezoid_formula(rng):
    p = rng.normal(size=(12, 2))
    k = rng.normal(size=12)
    expected = sum((abs(k[i]) + abs(k[i + 1])) * np.hypot(*(p[i + 1] - p[i])) / 2
                   for i in range(11))
    assert total_curvature(p, k) == pytest.approx(expected, rel=1e-13)


def test_total_curvature_splits_at_shared_point(rng):
    p = rng.normal(size=(20, 2))
    k = curvature(p)
    for s in (1, 7, 18):
        parts = total_curvature(p[:s + 1], k[:s + 1]) + total_curvature(p[s:], k[s:])
        assert parts == pytest.approx(total_curvature(p, k), rel=1e-12)


def test_arclen_examples():
    assert arclen([[0, 0], [3, 4]]) == 5.0
    assert arclen([[0, 0], [1, 0], [1, 1], [0, 1]]) == 3.0
    p = np.random.default_rng(1).normal(size=(10, 2))
    assert arclen(p) == pytest.approx(arclen(p[::-1]), rel=1e-14)


def test_hausdorff_examples():
    a = np.array([[0.0, 0.0]])
    assert hausdorff(a, [[1, 0], [0, 2]]) == 2.0
    assert directed_hausdorff(a, [[1, 0], [0, 2]]) == 1.0
    assert hausdorff(a, a + [3, 4]) == 5.0
    p = np.random.default_rng(2).normal(size=(15, 2))
    assert hausdorff(p, p) == 0.0
    with pytest.raises(InvalidArgumentError):
        hausdorff(np.zeros((0, 2)), a)


@settings(max_examples=60, deadline=None)
@given(point_clouds, point_clouds, point_clouds)
def test_hausdorff_metric_properties(a, b, c):
    ab = hausdorff(a, b)
    assert ab == pytest.approx(brute_hausdorff(a, b), abs=1e-9)
    assert ab == hausdorff(b, a)
    assert ab >= 0
    assert hausdorff(a, c) <= ab + hausdorff(b, c) + 1e-9
    same = {tuple(r) for r in a} == {tuple(r) for r in b}
    assert (ab == 0) == same


def test_curve_hausdorff_samples_ten_per_point():
    curve = BSplineCurve(KnotVector([0, 0, 1, 1], 1), [[0.0, 0.0], [1.0, 0.0]])
    points = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.2]])
    dense = np.column_stack([np.linspace(0, 1, 30), np.zeros(30)])
    assert curve_hausdorff(curve, points) == pytest.approx(brute_hausdorff(points, dense))


def test_minmax_normalize():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    np.testing.assert_array_equal(minmax_normalize(sq)[0], sq)
    flat = np.column_stack([np.arange(5.0), np.full(5, 2.0)])
    out = minmax_normalize(flat)[0]
    np.testing.assert_array_equal(out[:, 1], 0.5)
    assert minmax_normalize(out)[0].tolist() == out.tolist()
    with pytest.raises(InvalidArgumentError):
        minmax_normalize(np.ones((4, 2)))
