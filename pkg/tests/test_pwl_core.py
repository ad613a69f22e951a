import numpy as np
import pytest
from hypothesis import given, strategies as st

from maesplit.pwl_core import (FnView, PiecewiseLinearFn, build_abs_sum, dagger, dagger_eval, evaluate,
                               evaluate_at_index, mae, median, restrict, sum_functions, window)

from conftest import brute_abs_sum, random_unimodal

point_lists = st.lists(st.integers(-50, 50).map(float) | st.floats(-1e3, 1e3, allow_nan=False),
                       min_size=1, max_size=200)


# construction ---------------------------------------------------------------

def test_abs_sum_single_point():
    f = build_abs_sum([0])
    assert f.breakpoints.tolist() == [0.0]
    assert f.values.tolist() == [0.0]
    assert (f.initial_slope, f.final_slope) == (-1.0, 1.0)


def test_abs_sum_two_points_flat_valley():
    f = build_abs_sum([1, 3])
    assert f.breakpoints.tolist() == [1.0, 3.0]
    assert f.values.tolist() == [2.0, 2.0]
    assert f.slopes.tolist() == [-2.0, 0.0, 2.0]


def test_abs_sum_merges_duplicates():
    f = build_abs_sum([0, 0, 4])
    assert f.breakpoints.tolist() == [0.0, 4.0]
    assert f.values.tolist() == [4.0, 8.0]
    assert f.slopes.tolist() == [-3.0, 1.0, 3.0]


def test_abs_sum_errors():
    with pytest.raises(ValueError, match="empty group"):
        build_abs_sum([])
    with pytest.raises(ValueError, match="invalid sample"):
        build_abs_sum([1.0, np.nan])
    with pytest.raises(ValueError, match="invalid sample"):
        build_abs_sum([np.inf])


@given(point_lists, st.lists(st.floats(-2e3, 2e3, allow_nan=False), min_size=1, max_size=100))
def test_abs_sum_matches_direct_sum(points, xs):
    f = build_abs_sum(points)
    got = evaluate(f, np.array(xs))
    want = brute_abs_sum(points, xs)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-9)
    assert f.is_convex()
    assert f.initial_slope == -len(points) and f.final_slope == len(points)


def test_constructor_rejects_non_unimodal():
    with pytest.raises(ValueError, match="unimodal"):
        PiecewiseLinearFn([0, 1, 2], [0, 1, 0], -1, 1)
    with pytest.raises(ValueError, match="unbounded"):
        PiecewiseLinearFn([0], [0], 1, 1)
    with pytest.raises(ValueError, match="conflicting"):
        PiecewiseLinearFn([0, 0], [0, 1], -1, 1)


def test_constructor_sorts_and_merges():
    f = PiecewiseLinearFn([2, 0, 2], [2, 0, 2], -1, 1)
    assert f.breakpoints.tolist() == [0.0, 2.0]
    assert f.slopes.tolist() == [-1.0, 1.0, 1.0]
    assert f.argmin_index == 0


def test_argmin_is_rightmost_minimizer():
    f = build_abs_sum([1, 3])
    assert f.breakpoints[f.argmin_index] == 3.0
    flat_tail = PiecewiseLinearFn([0, 1], [1, 0], -1, 0)
    assert flat_tail.argmin_index == 1


def test_functions_are_immutable():
    f = build_abs_sum([1, 2])
    with pytest.raises(ValueError):
        f.values[0] = 5.0


# evaluation -----------------------------------------------------------------

def test_evaluate_examples():
    f = build_abs_sum([1, 3])
    assert evaluate(f, 2) == 2.0
    assert evaluate(f, -1) == 6.0
    assert evaluate(f, 10) == 16.0
    np.testing.assert_array_equal(evaluate(f, [2, -1, 10]), [2, 6, 16])


def test_evaluate_at_index_examples():
    f13 = build_abs_sum([1, 3])
    assert evaluate_at_index(f13, 0) == 2.0
    assert evaluate_at_index(f13, 1) == 2.0
    assert evaluate_at_index(build_abs_sum([0, 0, 4]), 1) == 8.0
    with pytest.raises(IndexError):
        evaluate_at_index(f13, 2)
    with pytest.raises(IndexError):
        evaluate_at_index(restrict(f13, 1, 1), 0)


# sum ------------------------------------------------------------------------

def test_sum_examples():
    f = sum_functions([build_abs_sum([0]), build_abs_sum([2])])
    assert f.breakpoints.tolist() == [0.0, 2.0]
    assert f.values.tolist() == [2.0, 2.0]
    assert (f.initial_slope, f.final_slope) == (-2.0, 2.0)

    g = sum_functions([build_abs_sum([0]), build_abs_sum([10]), build_abs_sum([4])])
    assert g.breakpoints.tolist() == [0.0, 4.0, 10.0]
    assert g.values.tolist() == [14.0, 10.0, 16.0]


def test_empty_sum_is_zero():
    z = sum_functions([])
    assert z.size == 0
    assert (z.initial_slope, z.final_slope) == (0.0, 0.0)
    assert evaluate(z, 3.5) == 0.0


@given(st.lists(point_lists, min_size=1, max_size=5), st.lists(st.floats(-2e3, 2e3), min_size=1, max_size=30))
def test_sum_is_pointwise(groups, xs):
    fs = [build_abs_sum(g) for g in groups]
    total = sum_functions(fs)
    want = sum(brute_abs_sum(g, xs) for g in groups)
    np.testing.assert_allclose(evaluate(total, np.array(xs)), want, rtol=1e-9, atol=1e-6)
    assert total.is_convex()
    rev = sum_functions(fs[::-1])
    np.testing.assert_allclose(evaluate(rev, np.array(xs)), evaluate(total, np.array(xs)), rtol=1e-12)


def test_sum_of_unimodal_keeps_slope_sequence(rng):
    for _ in range(50):
        fs = [random_unimodal(rng, convex=True) for _ in range(3)]
        s = sum_functions(fs)
        xs = np.linspace(-12, 12, 97)
        np.testing.assert_allclose(evaluate(s, xs), sum(evaluate(f, xs) for f in fs), atol=1e-9)
        assert s.is_convex()


# median / mae ---------------------------------------------------------------

@pytest.mark.parametrize("points, med, cost", [
    ([0, 1, 10], 1.0, 10.0),
    ([0, 10], 0.0, 10.0),
    ([5], 5.0, 0.0),
])
def test_median_and_mae_examples(points, med, cost):
    assert median(points) == med
    assert mae(points) == cost


def test_median_mae_empty():
    with pytest.raises(ValueError):
        median([])
    with pytest.raises(ValueError):
        mae([])


@given(point_lists)
def test_mae_is_min_over_candidates(points):
    costs = brute_abs_sum(points, points)
    assert mae(points) == pytest.approx(costs.min(), rel=1e-12, abs=1e-9)
    assert median(points) == sorted(points)[(len(points) - 1) // 2]
    assert brute_abs_sum(points, [median(points)])[0] == pytest.approx(costs.min(), rel=1e-12, abs=1e-9)


# views ----------------------------------------------------------------------

def test_restrict_examples():
    f = sum_functions([build_abs_sum([0]), build_abs_sum([10]), build_abs_sum([4])])
    v = restrict(f, 0, 2)
    xs = np.linspace(0, 10, 41)
    np.testing.assert_array_equal(evaluate(v, xs), evaluate(f, xs))
    one = restrict(f, 1, 1)
    assert one.size == 1 and one.breakpoints.tolist() == [4.0]
    assert evaluate(restrict(f, 0, 1), 4.0) == evaluate(f, 4.0)


def test_restrict_errors():
    f = build_abs_sum([0, 1, 2])
    with pytest.raises(ValueError, match="inverted"):
        restrict(f, 2, 1)
    with pytest.raises(IndexError):
        restrict(f, 0, 3)


def test_view_slope_deltas_and_window():
    f = build_abs_sum([0, 0, 4, 9])
    v = restrict(f, 1, 2)
    assert v.slope_deltas.tolist() == [2.0, 2.0]
    w = window(f, 0.5, 3.0)
    assert isinstance(w, FnView) and w.size == 0
    assert window(f, -1, 4).breakpoints.tolist() == [0.0, 4.0]


# dagger ---------------------------------------------------------------------

def test_dagger_examples():
    d = dagger(build_abs_sum([0]))
    assert dagger_eval(d, -2) == 2.0
    assert dagger_eval(d, 1) == -np.inf
    d2 = dagger(build_abs_sum([0, 4]))
    assert dagger_eval(d2, -1) == 5.0
    assert dagger_eval(d2, 0) == 4.0
    assert dagger_eval(d2, 5) == -np.inf


def test_dagger_is_cached_and_keeps_source():
    f = build_abs_sum([1, 2, 7])
    assert dagger(f) is dagger(f)
    assert dagger(f).source is f


def test_dagger_at_unique_minimum_is_identity():
    f = build_abs_sum([-3, 1, 8])
    assert dagger(f)(1.0) == 1.0


def test_dagger_flat_tail_is_unbounded():
    f = PiecewiseLinearFn([0, 2], [4, 0], -2, 0)
    d = dagger(f)
    assert d(-5) == np.inf
    assert d(2) == np.inf


def test_dagger_plateau_on_rising_arm():
    # value 2 is held on [1, 3] of the rising arm
    f = PiecewiseLinearFn([0, 1, 3, 4], [0, 2, 2, 4], -1, 2)
    d = dagger(f)
    assert d(-2) == 3.0
    assert d(-1.9) == pytest.approx(0.95)


def _check_dagger_property(f, grid):
    d = dagger(f)
    c = f.breakpoints[f.argmin_index]
    vals = evaluate(f, grid)
    for i, x in enumerate(grid):
        if x > c:
            assert d(x) == -np.inf
            continue
        dx = d(x)
        for j in range(i, len(grid)):
            cheaper = vals[j] <= vals[i] + 1e-9 * max(1.0, abs(vals[i]))
            assert cheaper == (grid[j] <= dx + 1e-9), (f.breakpoints, f.values, f.slopes, x, grid[j])


def test_dagger_property_convex(rng):
    for _ in range(100):
        f = random_unimodal(rng, convex=True)
        _check_dagger_property(f, np.arange(-10.0, 10.5, 0.5))


def test_dagger_property_unimodal_with_plateaus(rng):
    for _ in range(100):
        f = random_unimodal(rng)
        _check_dagger_property(f, np.arange(-10.0, 10.5, 0.5))


def test_dagger_nonincreasing(rng):
    for _ in range(50):
        f = random_unimodal(rng)
        c = f.breakpoints[f.argmin_index]
        xs = np.linspace(-12, c, 60)
        dv = dagger(f)(xs)
        finite = np.isfinite(dv)
        assert np.all(np.diff(dv[finite]) <= 1e-9)


def test_dagger_property_does_not_extend_left_of_x():
    # f(-2) > f(-1) although -2 <= f_dagger(-1) = 1: the equivalence only holds for x' >= x
    f = build_abs_sum([0])
    d = dagger(f)
    assert -2 <= d(-1) and f(-2) > f(-1)
