from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mems_limit.grids import (
    ConfigurationError,
    GridFunction1D,
    GridFunction2D,
    IntervalGrid,
    RectGrid,
    UnsupportedOrderError,
    derivative_1d,
    integrate_1d,
    integrate_rect,
    sobolev_norm,
)


def test_interval_grid_nodes():
    g = IntervalGrid(40)
    assert g.nodes[0] == -1.0 and g.nodes[-1] == 1.0
    assert np.allclose(np.diff(g.nodes), g.h, rtol=1e-14, atol=0)
    assert g.n_nodes == 41


@pytest.mark.parametrize("n", [0, 7, 3.5, -8])
def test_interval_grid_rejects_coarse(n):
    with pytest.raises(ConfigurationError):
        IntervalGrid(n)


def test_rect_grid():
    r = RectGrid(IntervalGrid(16), 8)
    assert r.eta_nodes[0] == 0.0 and r.eta_nodes[-1] == 1.0
    assert r.k == 1 / 8 and r.shape == (17, 9)
    assert RectGrid.from_nodes(257, 129).shape == (257, 129)


def test_grid_function_validation():
    g = IntervalGrid(8)
    with pytest.raises(ValueError):
        GridFunction1D(np.zeros(8), g)
    with pytest.raises(ValueError):
        GridFunction1D(np.full(9, np.nan), g)
    with pytest.raises(ValueError):
        GridFunction2D(np.zeros((9, 4)), RectGrid(g, 4))


def test_derivative_exact_on_low_degree():
    g = IntervalGrid(16)
    assert np.allclose(derivative_1d(g.sample(lambda x: x), 1).values, 1.0, atol=1e-12)
    assert np.allclose(derivative_1d(g.sample(lambda x: x**2), 2).values, 2.0, atol=1e-9)
    assert np.allclose(derivative_1d(g.sample(lambda x: x**2), 1).values, 2 * g.nodes, atol=1e-12)


def test_derivative_sin_accuracy():
    # the centered truncation error pi^3 h^2 / 6 is 1.26e-3 at n = 128
    g = IntervalGrid(128)
    d = derivative_1d(g.sample(lambda x: np.sin(np.pi * x)), 1)
    err = np.abs(d.values - np.pi * np.cos(np.pi * g.nodes))
    bound = np.pi**3 * g.h**2 / 6
    assert err[1:-1].max() <= 1.01 * bound
    assert err.max() <= 2.01 * bound
    assert np.abs(derivative_1d(IntervalGrid(256).sample(lambda x: np.sin(np.pi * x)), 1).values
                  - np.pi * np.cos(np.pi * IntervalGrid(256).nodes))[1:-1].max() <= 1e-3


@pytest.mark.parametrize("order", [1, 2])
def test_derivative_second_order_refinement(order):
    errs = []
    exact = {1: lambda x: np.pi * np.cos(np.pi * x), 2: lambda x: -np.pi**2 * np.sin(np.pi * x)}[order]
    for n in (32, 64, 128):
        g = IntervalGrid(n)
        d = derivative_1d(g.sample(lambda x: np.sin(np.pi * x)), order)
        errs.append(np.abs(d.values - exact(g.nodes)).max())
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


def test_integrate_1d_examples():
    g = IntervalGrid(256)
    assert integrate_1d(g.sample(lambda x: np.ones_like(x))) == pytest.approx(2.0, abs=1e-14)
    assert integrate_1d(g.sample(lambda x: x)) == pytest.approx(0.0, abs=1e-14)
    assert integrate_1d(g.sample(lambda x: (1 - x**2) ** 2)) == pytest.approx(16 / 15, abs=1e-4)


def test_integrate_rect_examples():
    r = RectGrid(IntervalGrid(128), 64)
    assert integrate_rect(r.sample(lambda x, e: 1.0)) == pytest.approx(2.0, abs=1e-13)
    assert integrate_rect(r.sample(lambda x, e: e)) == pytest.approx(1.0, abs=1e-13)
    assert integrate_rect(r.sample(lambda x, e: x**2 * e**2)) == pytest.approx(2 / 9, abs=1e-4)


def test_integrate_type_check():
    with pytest.raises(TypeError):
        integrate_1d(np.ones(9))


def test_sobolev_examples():
    g = IntervalGrid(256)
    f = g.sample(lambda x: 1 - x**2)
    assert sobolev_norm(f, 0) == pytest.approx(np.sqrt(16 / 15), abs=1e-3)
    assert sobolev_norm(f, 1) == pytest.approx(np.sqrt(16 / 15 + 8 / 3), abs=1e-3)
    zero = g.sample(lambda x: 0 * x)
    for s in (0, 0.25, 1, 1.75, 2.5, 3):
        assert sobolev_norm(zero, s) == 0.0


def test_sobolev_order_range():
    f = IntervalGrid(16).sample(np.cos)
    with pytest.raises(UnsupportedOrderError):
        sobolev_norm(f, 3.5)
    with pytest.raises(UnsupportedOrderError):
        sobolev_norm(f, -0.1)


def test_sobolev_zero_equals_l2():
    g = IntervalGrid(64)
    f = g.sample(lambda x: np.exp(x) * np.sin(3 * x))
    assert sobolev_norm(f, 0) == np.sqrt(integrate_1d(f * f))


SMOOTH = [lambda x: (1 - x**2) ** 2, lambda x: 1 - x**2, lambda x: np.sin(np.pi * x), lambda x: x]


@pytest.mark.parametrize("func", SMOOTH)
def test_sobolev_monotone_on_guaranteed_orderings(func):
    f = IntervalGrid(128).sample(func)
    n = {s: sobolev_norm(f, s) for s in (0, 0.5, 1, 1.5, 2)}
    slack = 1e-10
    assert n[0] <= n[0.5] + slack and n[0] <= n[1] + slack
    assert n[1] <= n[1.5] + slack and n[1] <= n[2] + slack


def test_unnormalized_seminorm_breaks_half_to_one_ordering():
    # the double-sum seminorm carries no normalizing constant, so the
    # H^0.5 value can exceed the H^1 value for smooth functions
    f = IntervalGrid(128).sample(lambda x: (1 - x**2) ** 2)
    assert sobolev_norm(f, 0.5) > sobolev_norm(f, 1.0)


coeffs = st.floats(-3, 3, allow_nan=False)


@given(coeffs, coeffs, st.integers(1, 2))
def test_derivative_linear(a, b, order):
    g = IntervalGrid(32)
    f = g.sample(np.sin)
    h = g.sample(lambda x: x**3 - np.cos(2 * x))
    lhs = derivative_1d(a * f + b * h, order).values
    rhs = a * derivative_1d(f, order).values + b * derivative_1d(h, order).values
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-9)


@given(st.floats(0, 3), st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3))
def test_sobolev_homogeneous(s, c):
    f = IntervalGrid(32).sample(lambda x: np.cos(x) * (1 - x**2))
    assert sobolev_norm(c * f, s) == pytest.approx(abs(c) * sobolev_norm(f, s), rel=1e-12)


@given(st.lists(st.floats(-10, 10), min_size=17, max_size=17), st.floats(0, 0.99))
def test_sobolev_fractional_bounds_integer_part(vals, sigma):
    f = GridFunction1D(np.array(vals), IntervalGrid(16))
    assert sobolev_norm(f, sigma) >= sobolev_norm(f, 0) - 1e-12
