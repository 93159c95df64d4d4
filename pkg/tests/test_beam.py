from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mems_limit.beam import (
    DeflectionProfile,
    ModelParams,
    TouchdownError,
    apply_beam_operator,
    assemble_beam_matrix,
    check_admissible,
    mechanical_energy,
    stretch_norm_sq,
)
from mems_limit.grids import ConfigurationError, IntervalGrid, integrate_1d

from conftest import bump


def quartic(x):
    return (1 - x**2) ** 2


@pytest.mark.parametrize("kw", [dict(beta=0.0), dict(beta=-1.0), dict(tau=-0.1), dict(a=-1.0),
                                dict(gamma=-1.0), dict(lam=-0.5), dict(eps=1.0), dict(eps=-0.1)])
def test_params_reject_out_of_range(kw):
    with pytest.raises(ConfigurationError):
        ModelParams(**kw)


def test_profile_invariants():
    g = IntervalGrid(16)
    v = DeflectionProfile.from_values(np.full(17, -0.2), g)
    assert v.values[0] == 0.0 and v.values[-1] == 0.0
    with pytest.raises(TouchdownError):
        DeflectionProfile.from_function(lambda x: -1.2 * quartic(x), g)
    free = DeflectionProfile.from_values(np.full(17, -0.5), g, clamp_ends=False)
    assert np.all(free.values == -0.5) and np.all(free.V.values == 0)


def test_beam_matrix_rejects_coarse_grid():
    with pytest.raises(ConfigurationError):
        IntervalGrid(4)


def test_beam_matrix_shape_symmetric_positive():
    g = IntervalGrid(64)
    bm = assemble_beam_matrix(ModelParams(beta=2.0, tau=0.7), g)
    K = bm.matrix.toarray()
    assert bm.size == g.n_cells - 1
    assert np.abs(K - K.T).max() <= 1e-12 * np.abs(K).max()
    lam_min = bm.smallest_eigenvalue()
    assert lam_min > 0
    assert lam_min == pytest.approx(np.linalg.eigvalsh(K).min(), rel=1e-8)


def test_fourth_derivative_of_clamped_quartic():
    g = IntervalGrid(256)
    v = DeflectionProfile.from_function(lambda x: 0.5 * quartic(x), g)
    out = 2 * apply_beam_operator(v, ModelParams()).values
    # ghost reflection is exact only to O(h^2) in u, so the first interior
    # node on each side carries an O(1/h) error
    assert np.abs(out[2:-2] - 24).max() <= 1e-8
    assert out[0] == 0 and out[-1] == 0


def test_tension_term_at_center():
    # d2/dx2 (1-x^2)^2 = 12x^2 - 4, so beta*24 - tau*(-4) at x = 0; the
    # centered second difference of a quartic is off by exactly 2 h^2
    g = IntervalGrid(256)
    beta, tau = 1.5, 0.8
    v = DeflectionProfile.from_function(lambda x: 0.5 * quartic(x), g)
    mid = 2 * apply_beam_operator(v, ModelParams(beta=beta, tau=tau)).values[128]
    assert mid == pytest.approx(24 * beta + 4 * tau, abs=2 * tau * g.h**2 + 1e-6)


def test_apply_zero_and_matrix_coincidence():
    g = IntervalGrid(32)
    p = ModelParams(beta=1.3, tau=0.4)
    assert np.all(apply_beam_operator(DeflectionProfile.zero(g), p).values == 0)
    v = DeflectionProfile.from_function(lambda x: -0.2 * np.cos(np.pi * x / 2) ** 2, g)
    bm = assemble_beam_matrix(p, g)
    assert np.array_equal(apply_beam_operator(v, p).values[1:-1], bm @ v.interior)


def test_self_stretching_value():
    g = IntervalGrid(128)
    v = DeflectionProfile.from_function(bump(0.3), g)
    mid = apply_beam_operator(v, ModelParams(a=1.0)).values[64]
    assert mid == pytest.approx(-0.3 * 24 - 0.09 * 256 / 105 * (-0.3) * (-4), abs=1e-3)


def test_self_stretching_additivity():
    g = IntervalGrid(64)
    v = DeflectionProfile.from_function(lambda x: -0.4 * quartic(x) * (1 + 0.3 * x), g)
    base = apply_beam_operator(v, ModelParams(tau=0.5)).values
    full = apply_beam_operator(v, ModelParams(tau=0.5, a=2.0)).values
    bm = assemble_beam_matrix(ModelParams(), g)
    expected = -2.0 * stretch_norm_sq(v.values, g) * (bm.d2 @ v.interior)
    assert np.allclose(full[1:-1] - base[1:-1], expected, rtol=1e-12, atol=1e-10)


def test_mechanical_energy_examples():
    g = IntervalGrid(256)
    p = ModelParams()
    assert mechanical_energy(DeflectionProfile.zero(g), p) == 0.0
    # -(1-x^2)^2 touches -1, so evaluate at half amplitude and use homogeneity
    half = mechanical_energy(DeflectionProfile.from_function(bump(0.5), g), p)
    assert 4 * half == pytest.approx(12.8, abs=1e-2)


def test_integration_by_parts_consistency():
    errs = []
    for n in (64, 128):
        g = IntervalGrid(n)
        p = ModelParams(beta=1.0, tau=2.0)
        v = DeflectionProfile.from_function(lambda x: -0.3 * quartic(x) * np.cos(x), g)
        lhs = np.dot(assemble_beam_matrix(p, g) @ v.interior, v.interior) * g.h
        rhs = integrate_1d(v.d2u * v.d2u) + 2.0 * integrate_1d(v.du * v.du)
        errs.append(abs(lhs - rhs) / rhs)
    assert errs[1] <= 10 * IntervalGrid(128).h
    assert errs[1] < errs[0]


def test_check_admissible_examples():
    g = IntervalGrid(128)
    assert check_admissible(DeflectionProfile.zero(g), 2, 0.5).ok
    deep = DeflectionProfile.from_function(bump(0.95), g)
    res = check_admissible(deep, 2, 0.1)
    assert not res and "lower bound" in res.failed
    assert check_admissible(DeflectionProfile.from_function(bump(0.3), g), 2, 0.05)


def test_check_admissible_norm_and_boundary_clauses():
    g = IntervalGrid(64)
    wiggle = DeflectionProfile.from_function(lambda x: 0.05 * quartic(x) * np.sin(12 * np.pi * x), g)
    assert check_admissible(wiggle, 2, 0.5).failed == ["norm bound"]
    pinned = DeflectionProfile.from_function(lambda x: -0.3 * (1 - x**2), g)
    assert "clamped slope" in check_admissible(pinned, 2, 0.1).failed
    assert check_admissible(pinned, 1.0, 0.1)
    loose = DeflectionProfile.from_values(np.full(65, -0.2), g, clamp_ends=False)
    assert "boundary values" in check_admissible(loose, 1, 0.1).failed
    with pytest.raises(ConfigurationError):
        check_admissible(pinned, 1, 1.5)


# entries below 1e-100 would square to zero in floating point
NONTINY = st.floats(-0.9, 0.9).filter(lambda x: x == 0 or abs(x) > 1e-100)


@given(st.lists(NONTINY, min_size=7, max_size=7), st.floats(0, 3), st.floats(0, 2))
def test_mechanical_energy_zero_iff_flat(vals, tau, a):
    g = IntervalGrid(8)
    u = np.zeros(9)
    u[1:-1] = vals
    v = DeflectionProfile.from_values(u, g)
    e = mechanical_energy(v, ModelParams(tau=tau, a=a))
    assert e >= 0
    assert (e == 0) == (not np.any(v.values))


@given(st.floats(0.01, 0.9), st.floats(0.05, 1.0))
def test_mechanical_energy_quadratic_homogeneity(c, theta):
    g = IntervalGrid(64)
    p = ModelParams(beta=1.2, tau=0.3)
    v = DeflectionProfile.from_function(lambda x: -c * quartic(x) * (1 + 0.2 * x), g)
    tv = DeflectionProfile.from_values(theta * v.values, g)
    assert mechanical_energy(tv, p) == pytest.approx(theta**2 * mechanical_energy(v, p), rel=1e-10)


@given(st.floats(0.1, 5), st.floats(0, 5))
def test_beam_matrix_positive_definite(beta, tau):
    bm = assemble_beam_matrix(ModelParams(beta=beta, tau=tau), IntervalGrid(16))
    assert np.linalg.eigvalsh(bm.matrix.toarray()).min() > 0
