import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pctf3d.simplex import simplex_project

from oracles import simplex_active_set, simplex_grid_qp


def test_feasible_point_is_fixed():
    np.testing.assert_allclose(simplex_project([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5], atol=1e-15)


def test_vertex():
    np.testing.assert_array_equal(simplex_project([2.0, 0.0, 0.0]), [1.0, 0.0, 0.0])


def test_derived_example():
    v = np.array([0.5, 0.5, 1.0])
    expected = simplex_active_set(v)
    np.testing.assert_allclose(expected, [1 / 6, 1 / 6, 2 / 3], atol=1e-15)
    np.testing.assert_allclose(simplex_grid_qp(v, steps=600), expected, atol=1e-2)
    np.testing.assert_allclose(simplex_project(v), expected, atol=1e-12)


def test_columnwise():
    rng = np.random.default_rng(0)
    V = rng.normal(size=(5, 4))
    P = simplex_project(V)
    for r in range(4):
        np.testing.assert_allclose(P[:, r], simplex_active_set(V[:, r]), atol=1e-10)


def test_ties_and_negatives():
    np.testing.assert_allclose(simplex_project([-1.0, -1.0]), [0.5, 0.5])
    np.testing.assert_allclose(simplex_project([3.0, 3.0, 3.0]), [1 / 3] * 3)


def test_rejects_order3():
    with pytest.raises(ValueError):
        simplex_project(np.zeros((2, 2, 2)))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 6), elements=st.floats(-5, 5)))
def test_matches_active_set_oracle(v):
    p = simplex_project(v)
    assert p.min() >= 0
    assert abs(p.sum() - 1) < 1e-12
    np.testing.assert_allclose(p, simplex_active_set(v), atol=1e-10)
