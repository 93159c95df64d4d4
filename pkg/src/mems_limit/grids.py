"""Uniform grids on I = (-1, 1) and Omega = (-1, 1) x (0, 1), finite
differences, trapezoid quadrature and Sobolev norms.

Everything downstream (beam operator, transformed Poisson problem, error
norms) uses the helpers in this module so that a single discrete calculus
is in force throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """Raised when a grid or discretization parameter is out of range."""


class UnsupportedOrderError(ValueError):
    """Raised for Sobolev orders outside the supported range [0, 3]."""


MIN_CELLS = 8
MAX_SOBOLEV_ORDER = 3.0


@dataclass(frozen=True)
class IntervalGrid:
    """Uniform grid on [-1, 1] with ``n_cells`` cells."""

    n_cells: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < MIN_CELLS:
            raise ConfigurationError(
                f"n_cells must be an integer >= {MIN_CELLS}, got {self.n_cells}"
            )
        nodes = np.linspace(-1.0, 1.0, self.n_cells + 1)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def h(self) -> float:
        return 2.0 / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    def sample(self, func) -> "GridFunction1D":
        return GridFunction1D(np.asarray(func(self.nodes), dtype=float), self)

    def weights(self) -> np.ndarray:
        """Composite trapezoid weights."""
        w = np.full(self.n_nodes, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


@dataclass(frozen=True)
class RectGrid:
    """Tensor grid on [-1, 1] x [0, 1]; arrays are indexed ``[i_x, j_eta]``."""

    grid_x: IntervalGrid
    n_eta: int
    eta_nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_eta) != self.n_eta or self.n_eta < 4:
            raise ConfigurationError(f"n_eta must be an integer >= 4, got {self.n_eta}")
        eta = np.linspace(0.0, 1.0, self.n_eta + 1)
        eta.setflags(write=False)
        object.__setattr__(self, "eta_nodes", eta)

    @classmethod
    def from_nodes(cls, nx_nodes: int, neta_nodes: int) -> "RectGrid":
        """Build from node counts, e.g. ``from_nodes(257, 129)``."""
        return cls(IntervalGrid(nx_nodes - 1), neta_nodes - 1)

    @property
    def h(self) -> float:
        return self.grid_x.h

    @property
    def k(self) -> float:
        return 1.0 / self.n_eta

    @property
    def shape(self) -> tuple[int, int]:
        return (self.grid_x.n_nodes, self.n_eta + 1)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.grid_x.nodes, self.eta_nodes, indexing="ij")

    def sample(self, func) -> "GridFunction2D":
        X, E = self.mesh()
        return GridFunction2D(np.asarray(func(X, E), dtype=float) * np.ones(self.shape), self)

    def weights(self) -> np.ndarray:
        we = np.full(self.n_eta + 1, self.k)
        we[0] = we[-1] = 0.5 * self.k
        return np.outer(self.grid_x.weights(), we)


@dataclass(frozen=True)
class GridFunction1D:
    values: np.ndarray
    grid: IntervalGrid

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"expected {self.grid.n_nodes} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function has non-finite values")
        object.__setattr__(self, "values", values)

    def __add__(self, other):
        return GridFunction1D(self.values + _vals(other), self.grid)

    def __sub__(self, other):
        return GridFunction1D(self.values - _vals(other), self.grid)

    def __mul__(self, other):
        return GridFunction1D(self.values * _vals(other), self.grid)

    __rmul__ = __mul__


@dataclass(frozen=True)
class GridFunction2D:
    values: np.ndarray
    grid: RectGrid

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function has non-finite values")
        object.__setattr__(self, "values", values)


def _vals(obj):
    return obj.values if isinstance(obj, (GridFunction1D, GridFunction2D)) else obj


def diff_values(f: np.ndarray, h: float, order: int, axis: int = 0) -> np.ndarray:
    """Second-order finite differences along ``axis`` of a raw array.

    Centered in the interior, one-sided (three or four points) at the ends.
    """
    f = np.asarray(f, dtype=float)
    n = f.shape[axis]
    if order not in (1, 2):
        raise ConfigurationError(f"derivative order must be 1 or 2, got {order}")
    if n < order + 2:
        raise ConfigurationError(f"need at least {order + 2} nodes, got {n}")
    if order == 1:
        return np.gradient(f, h, axis=axis, edge_order=2)
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[:-2] - 2.0 * f[1:-1] + f[2:]) / h**2
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h**2
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def derivative_1d(f: GridFunction1D, order: int = 1) -> GridFunction1D:
    """First or second derivative of a grid function, second-order accurate."""
    return GridFunction1D(diff_values(f.values, f.grid.h, order), f.grid)


def integrate_1d(f) -> float:
    """Composite trapezoid rule over I."""
    if isinstance(f, GridFunction1D):
        return float(np.dot(f.grid.weights(), f.values))
    raise TypeError("integrate_1d expects a GridFunction1D")


def integrate_rect(f) -> float:
    """Tensor-product trapezoid rule over Omega."""
    if isinstance(f, GridFunction2D):
        return float(np.sum(f.grid.weights() * f.values))
    raise TypeError("integrate_rect expects a GridFunction2D")


def gagliardo_seminorm_sq(g: np.ndarray, grid: IntervalGrid, sigma: float) -> float:
    """Squared double-sum Gagliardo-Slobodeckij seminorm of order ``sigma``.

    sum_i sum_{j != i} h^2 |g_i - g_j|^2 / |x_i - x_j|^(1 + 2 sigma)
    """
    x = grid.nodes
    dx = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dx, 1.0)
    dg = g[:, None] - g[None, :]
    kernel = dx ** (-(1.0 + 2.0 * sigma))
    np.fill_diagonal(kernel, 0.0)
    return float(grid.h**2 * np.sum(dg * dg * kernel))


def _derivatives(values: np.ndarray, h: float, m: int) -> list[np.ndarray]:
    out = [values]
    for j in range(1, m + 1):
        if j % 2 == 0:
            out.append(diff_values(out[j - 2], h, 2))
        else:
            out.append(diff_values(out[j - 1], h, 1))
    return out


def sobolev_norm(f: GridFunction1D, s: float) -> float:
    """Discrete H^s norm on I for 0 <= s <= 3.

    For integer ``s`` this is sqrt(sum_{j<=s} ||d^j f||^2); a fractional part
    sigma adds the Gagliardo seminorm of d^floor(s) f.
    """
    if s < 0:
        raise UnsupportedOrderError(f"negative order {s} not supported")
    if s > MAX_SOBOLEV_ORDER:
        raise UnsupportedOrderError(f"order {s} exceeds {MAX_SOBOLEV_ORDER}")
    m = int(np.floor(s))
    sigma = s - m
    grid = f.grid
    w = grid.weights()
    derivs = _derivatives(f.values, grid.h, m)
    total = sum(float(np.dot(w, d * d)) for d in derivs)
    if sigma > 1e-14:
        total += gagliardo_seminorm_sq(derivs[m], grid, sigma)
    return float(np.sqrt(total))
