"""Clamped fourth-order beam operator, mechanical energy and admissibility.

The discrete operator acts on the interior unknowns u_1 .. u_{n-1} of an
``IntervalGrid`` with n cells. u(+-1) = 0 eliminates the boundary nodes and
u_x(+-1) = 0 is imposed through the ghost reflection u_{-1} = u_1, which
turns the first and last rows of the five-point fourth difference into
``7, -4, 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grids import (
    ConfigurationError,
    GridFunction1D,
    IntervalGrid,
    MIN_CELLS,
    derivative_1d,
    diff_values,
    integrate_1d,
    sobolev_norm,
)


class TouchdownError(ValueError):
    """A deflection reached the ground plate (min u <= -1)."""


@dataclass(frozen=True)
class ModelParams:
    """Physical and scaling constants of the device.

    ``lam`` is the voltage parameter (lambda); ``eps = 0`` selects the
    small aspect ratio limit model.
    """

    beta: float = 1.0
    tau: float = 0.0
    a: float = 0.0
    gamma: float = 0.0
    lam: float = 0.0
    eps: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigurationError(f"beta must be > 0, got {self.beta}")
        for name in ("tau", "a", "gamma", "lam"):
            if not getattr(self, name) >= 0:
                raise ConfigurationError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0 <= self.eps < 1:
            raise ConfigurationError(f"eps must lie in [0, 1), got {self.eps}")

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class DeflectionProfile:
    """Plate deflection u on the interval grid with cached derivatives.

    By default the end values are forced to zero. ``clamp_ends=False`` keeps
    the values as given, which the potential solver accepts for analytic
    tests with constant profiles.
    """

    u: GridFunction1D
    clamp_ends: bool = True

    def __post_init__(self):
        values = np.array(self.u.values, dtype=float)
        if self.clamp_ends:
            values[0] = values[-1] = 0.0
        if values.min() <= -1.0:
            raise TouchdownError(f"min(u) = {values.min():.6g} <= -1")
        values.setflags(write=False)
        object.__setattr__(self, "u", GridFunction1D(values, self.u.grid))

    @classmethod
    def from_values(cls, values, grid: IntervalGrid, clamp_ends: bool = True):
        return cls(GridFunction1D(np.asarray(values, dtype=float), grid), clamp_ends)

    @classmethod
    def from_function(cls, func, grid: IntervalGrid, clamp_ends: bool = True):
        return cls(grid.sample(func), clamp_ends)

    @classmethod
    def zero(cls, grid: IntervalGrid):
        return cls.from_values(np.zeros(grid.n_nodes), grid)

    @property
    def grid(self) -> IntervalGrid:
        return self.u.grid

    @property
    def values(self) -> np.ndarray:
        return self.u.values

    @property
    def interior(self) -> np.ndarray:
        return self.u.values[1:-1]

    @cached_property
    def du(self) -> GridFunction1D:
        return derivative_1d(self.u, 1)

    @cached_property
    def d2u(self) -> GridFunction1D:
        return derivative_1d(self.u, 2)

    @cached_property
    def V(self) -> GridFunction1D:
        return GridFunction1D(self.du.values / (1.0 + self.u.values), self.grid)


def profile_from_interior(interior, grid: IntervalGrid) -> DeflectionProfile:
    values = np.zeros(grid.n_nodes)
    values[1:-1] = interior
    return DeflectionProfile.from_values(values, grid)


def stretch_norm_sq(values: np.ndarray, grid: IntervalGrid) -> float:
    """||u_x||_2^2 with the shared derivative/quadrature calculus."""
    du = diff_values(values, grid.h, 1)
    return float(np.dot(grid.weights(), du * du))


@dataclass(frozen=True)
class BeamMatrix:
    """Sparse SPD matrix of beta*D4 - tau*D2 on the interior unknowns."""

    matrix: sp.csc_matrix
    h: float
    beta: float
    tau: float
    boundary_closure: str = "ghost reflection u(-1-h) = u(-1+h) for D4; D2 uses u(+-1) = 0"
    d2: sp.csc_matrix = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other):
        return self.matrix @ other

    def smallest_eigenvalue(self, iterations: int = 30) -> float:
        """Inverse power iteration estimate of the smallest eigenvalue."""
        lu = spla.splu(self.matrix)
        x = np.cos(np.linspace(-np.pi / 2, np.pi / 2, self.size + 2)[1:-1])
        x /= np.linalg.norm(x)
        mu = 0.0
        for _ in range(iterations):
            y = lu.solve(x)
            mu = 1.0 / np.dot(x, y)
            x = y / np.linalg.norm(y)
        return float(mu)


def second_difference_matrix(grid: IntervalGrid) -> sp.csc_matrix:
    """Centered D2 on interior nodes with u(+-1) = 0 (no 1/h^2 factor)."""
    m = grid.n_cells - 1
    return sp.diags(
        [np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)], [-1, 0, 1], format="csc"
    )


def fourth_difference_matrix(grid: IntervalGrid) -> sp.csc_matrix:
    """Five-point D4 on interior nodes with clamped ghost closure (no 1/h^4)."""
    m = grid.n_cells - 1
    main = 6.0 * np.ones(m)
    main[0] = main[-1] = 7.0
    return sp.diags(
        [np.ones(m - 2), -4.0 * np.ones(m - 1), main, -4.0 * np.ones(m - 1), np.ones(m - 2)],
        [-2, -1, 0, 1, 2],
        format="csc",
    )


def assemble_beam_matrix(params: ModelParams, grid: IntervalGrid) -> BeamMatrix:
    if grid.n_cells < MIN_CELLS:
        raise ConfigurationError(f"need n_cells >= {MIN_CELLS}")
    h = grid.h
    d2 = second_difference_matrix(grid) / h**2
    d4 = fourth_difference_matrix(grid) / h**4
    K = (params.beta * d4 - params.tau * d2).tocsc()
    return BeamMatrix(K, h, params.beta, params.tau, d2=d2.tocsc())


def apply_beam_operator(v: DeflectionProfile, params: ModelParams, beam: BeamMatrix | None = None):
    """beta u'''' - (tau + a ||u'||^2) u'' at interior nodes; ends set to 0."""
    grid = v.grid
    if beam is None:
        beam = assemble_beam_matrix(params, grid)
    inner = beam.matrix @ v.interior
    if params.a > 0:
        inner = inner - params.a * stretch_norm_sq(v.values, grid) * (beam.d2 @ v.interior)
    out = np.zeros(grid.n_nodes)
    out[1:-1] = inner
    return GridFunction1D(out, grid)


def mechanical_energy(v: DeflectionProfile, params: ModelParams) -> float:
    bend = integrate_1d(v.d2u * v.d2u)
    stretch = integrate_1d(v.du * v.du)
    return 0.5 * params.beta * bend + 0.5 * (params.tau + 0.5 * params.a * stretch) * stretch


@dataclass
class Admissibility:
    ok: bool
    failed: list[str]
    min_value: float
    norm: float
    bound: float

    def __bool__(self):
        return self.ok


def check_admissible(v: DeflectionProfile, s: float, kappa: float, bc_tol: float | None = None) -> Admissibility:
    """Membership of v in S_2^s(kappa): lower bound, norm bound, clamped ends.

    ``bc_tol`` bounds |u_x(+-1)|; the default scales with h since the
    one-sided endpoint derivative is only second-order accurate.
    """
    if not 0 < kappa < 1:
        raise ConfigurationError(f"kappa must lie in (0, 1), got {kappa}")
    values = v.values
    failed = []
    vmin = float(values.min())
    if not vmin > -1.0 + kappa:
        failed.append("lower bound")
    norm = sobolev_norm(v.u, s)
    if not norm < 1.0 / kappa:
        failed.append("norm bound")
    scale = max(1.0, float(np.abs(values).max()))
    if bc_tol is None:
        bc_tol = 10.0 * v.grid.h * scale
    if s > 0.5 and (abs(values[0]) > 1e-12 or abs(values[-1]) > 1e-12):
        failed.append("boundary values")
    elif s > 1.5 and max(abs(v.du.values[0]), abs(v.du.values[-1])) > bc_tol:
        failed.append("clamped slope")
    return Admissibility(not failed, failed, vmin, norm, 1.0 / kappa)
