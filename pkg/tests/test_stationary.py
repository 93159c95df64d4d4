from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mems_limit.beam import ModelParams
from mems_limit.grids import ConfigurationError, GridFunction1D, IntervalGrid, integrate_1d, sobolev_norm
from mems_limit.stationary import (
    BeamSystem,
    NoConvergence,
    find_pullin_threshold,
    solve_coupled_stationary,
    solve_limit_constrained,
    solve_limit_stationary,
    verify_minimizer,
)

P0 = ModelParams()


def assert_valid(sol, even=True):
    u = sol.u.values
    assert u.min() > -1 and u.max() <= 1e-10
    if even:
        assert np.abs(u - u[::-1]).max() <= 5e-3 * max(np.abs(u).max(), 1e-300)


@pytest.fixture(scope="module")
def g128():
    return IntervalGrid(128)


def test_zero_voltage(g128):
    sol = solve_limit_stationary(0.0, P0, g128)
    assert sol.newton_iters <= 1 and not np.any(sol.u.values)


def test_linearized_small_voltage(g128):
    lam = 0.01
    sol = solve_limit_stationary(lam, P0, g128)
    x = g128.nodes
    assert sol.u.values[64] == pytest.approx(-lam / 24, abs=5e-5)
    assert np.abs(sol.u.values + lam * (1 - x**2) ** 2 / 24).max() <= 1e-4
    assert sol.residual_norm <= 1e-10
    assert_valid(sol)


@pytest.mark.parametrize("params", [ModelParams(tau=0.5), ModelParams(a=1.0), ModelParams(beta=2.0, tau=1.0, a=0.5)])
def test_newton_with_tension_and_stretching(params, g128):
    sol = solve_limit_stationary(2.0, params, g128)
    assert sol.residual_norm <= 1e-10 and sol.newton_iters <= 15
    system = BeamSystem(params, g128)
    y = sol.u.interior
    R = system.elastic(y) + 2.0 / (1 + y) ** 2
    assert np.abs(R).max() <= 1e-6 * np.abs(system.K @ y).max()
    assert_valid(sol)


def test_rejects_negative_lambda(g128):
    with pytest.raises(ConfigurationError):
        solve_limit_stationary(-1.0, P0, g128)


def test_above_pullin_fails_with_last_iterate(g128):
    with pytest.raises(NoConvergence) as info:
        solve_limit_stationary(6.0, P0, g128)
    assert info.value.lam == 6.0


def test_constrained_near_trivial(g128):
    sol = solve_limit_constrained(2.001, P0, g128)
    assert 0 < sol.lam < 0.1 and np.abs(sol.u.values).max() <= 1e-2


@pytest.mark.parametrize("rho", [0.5, 2.0])
def test_constrained_rejects_degenerate(rho, g128):
    with pytest.raises(ConfigurationError):
        solve_limit_constrained(rho, P0, g128)


def test_constrained_cross_validation(g128):
    sol = solve_limit_constrained(2.5, P0, g128)
    assert abs(integrate_1d(GridFunction1D(1 / (1 + sol.u.values), g128)) - 2.5) <= 1e-8
    assert_valid(sol)
    again = solve_limit_stationary(sol.lam, P0, g128, init=sol.u)
    assert again.residual_norm <= 1e-10
    assert np.abs(again.u.values - sol.u.values).max() <= 1e-6


def test_verify_minimizer(g128):
    sol = solve_limit_constrained(2.5, P0, g128)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        check = verify_minimizer(sol, P0, trial_count=20)
    assert len(caught) == check.skipped
    assert check.ok and check.margin >= -1e-8
    # u rescaled onto its own constraint: theta = 1 up to the constraint tolerance
    assert check.gaps[0] == pytest.approx(0.0, abs=1e-8)
    assert len(check.gaps) + check.skipped == 20


def test_coupled_zero_voltage(g128):
    sol = solve_coupled_stationary(0.0, 0.1, P0, g128, 32)
    assert not np.any(sol.u.values) and not np.any(sol.potential.phi.values)


def test_coupled_convergence_in_eps(g128):
    lam = 0.05
    u0 = solve_limit_stationary(lam, P0, g128)
    h1, gdiff = [], []
    for eps in (0.1, 0.05, 0.025):
        sol = solve_coupled_stationary(lam, eps, P0, g128, 64)
        assert_valid(sol)
        h1.append(sobolev_norm(GridFunction1D(sol.u.values - u0.u.values, g128), 1))
        lim = GridFunction1D(1 / (1 + sol.u.values) ** 2, g128)
        gdiff.append(sobolev_norm(sol.potential.g_eps - lim, 0.25))
    assert h1[0] > h1[1] > h1[2]
    assert gdiff[0] > gdiff[1] > gdiff[2]


def test_coupled_rejects_bad_eps(g128):
    for eps in (0.0, 1.0):
        with pytest.raises(ConfigurationError):
            solve_coupled_stationary(0.1, eps, P0, g128, 16)


def test_pullin_bracket_and_branch():
    g = IntervalGrid(64)
    rep = find_pullin_threshold(0.0, P0, g, tol=1e-3)
    assert rep.bracket_width <= 1e-3
    assert rep.lam_low < rep.lambda_star < rep.lam_high
    sol = solve_limit_stationary(rep.lam_low, P0, g)
    assert sol.u.values.min() > -1
    mins = [m for _, m, _ in rep.branch]
    assert all(a >= b for a, b in zip(mins, mins[1:]))
    again = find_pullin_threshold(0.0, P0, g, tol=1e-3)
    assert again.lambda_star == rep.lambda_star


def test_pullin_increases_with_tension():
    g = IntervalGrid(64)
    assert find_pullin_threshold(0.0, ModelParams(tau=1.0), g).lambda_star > \
        find_pullin_threshold(0.0, P0, g).lambda_star


def test_pullin_rejects_bad_tol():
    with pytest.raises(ConfigurationError):
        find_pullin_threshold(0.0, P0, IntervalGrid(16), tol=0.0)


@given(st.floats(0.0, 3.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_stationary_solutions_valid(lam, tau, a):
    g = IntervalGrid(32)
    sol = solve_limit_stationary(lam, ModelParams(tau=tau, a=a), g)
    assert sol.residual_norm <= 1e-10
    assert_valid(sol)
