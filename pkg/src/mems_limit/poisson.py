"""Electrostatic potential on the fixed rectangle.

The potential psi on the moving domain Omega(v) = {-1 < z < v(x)} is pulled
back by eta = (1 + z) / (1 + v(x)) and written as psi = Phi + eta, where Phi
vanishes on the boundary of Omega = (-1, 1) x (0, 1) and solves

    eps^2 Phi_xx - 2 eps^2 eta V Phi_xeta
        + (1 + eps^2 eta^2 v_x^2) / (1 + v)^2 Phi_etaeta
        + eps^2 eta (2 V^2 - v_xx / (1 + v)) Phi_eta = f_v,

with V = v_x / (1 + v) and f_v = eps^2 eta (v_xx / (1 + v) - 2 V^2).
The operator is discretized as written (non-divergence form) with a
nine-point stencil and solved by sparse LU.

Integrals over Omega(v) are evaluated on Omega with the Jacobian weight
(1 + v(x)).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .beam import DeflectionProfile, TouchdownError
from .grids import (
    GridFunction1D,
    GridFunction2D,
    RectGrid,
    diff_values,
    integrate_1d,
    sobolev_norm,
)


class SolverFailure(RuntimeError):
    """Sparse solve produced a non-finite or inaccurate potential."""


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class EllipticCoefficients:
    """Nodewise coefficients of the transformed operator, shape ``grid.shape``."""

    grid: RectGrid
    eps: float
    axx: np.ndarray
    axe: np.ndarray
    aee: np.ndarray
    be: np.ndarray
    rhs: np.ndarray


@dataclass
class PotentialSolution:
    """Phi on Omega plus the fields reconstructed from it.

    ``dz_psi``, ``dxdz_psi``, ``dzz_psi`` and ``dx_psi`` are the physical
    derivatives of psi evaluated at (x, z(x, eta)).
    """

    phi: GridFunction2D
    eps: float
    v: DeflectionProfile | None = None
    residual: float = 0.0
    gamma: GridFunction1D | None = None
    g_eps: GridFunction1D | None = None
    dx_psi: GridFunction2D | None = None
    dz_psi: GridFunction2D | None = None
    dxdz_psi: GridFunction2D | None = None
    dzz_psi: GridFunction2D | None = None
    phi_eta: np.ndarray | None = None
    phi_etaeta: np.ndarray | None = None
    phi_xeta: np.ndarray | None = None

    @property
    def grid(self) -> RectGrid:
        return self.phi.grid


def rect_grid_for(v: DeflectionProfile, n_eta: int) -> RectGrid:
    return RectGrid(v.grid, n_eta)


def compute_coefficients(v: DeflectionProfile, eps: float, grid: RectGrid,
                         dv=None, d2v=None) -> EllipticCoefficients:
    """Coefficients of the transformed operator and its source.

    ``dv``/``d2v`` override the cached finite-difference derivatives of v;
    the manufactured-solution check passes exact values here.
    """
    if v.values.min() <= -1.0:
        raise TouchdownError(f"min(v) = {v.values.min():.6g} <= -1")
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    if grid.grid_x.n_cells != v.grid.n_cells:
        raise ValueError("rectangle and profile use different x grids")
    one_v = 1.0 + v.values
    dv = v.du.values if dv is None else np.asarray(dv, dtype=float)
    d2v = v.d2u.values if d2v is None else np.asarray(d2v, dtype=float)
    V = dv / one_v
    eta = grid.eta_nodes[None, :]
    e2 = eps * eps
    shape = grid.shape
    axx = np.full(shape, e2)
    axe = -2.0 * e2 * eta * V[:, None]
    aee = (1.0 + e2 * eta**2 * (dv**2)[:, None]) / (one_v**2)[:, None]
    be = e2 * eta * (2.0 * V**2 - d2v / one_v)[:, None]
    rhs = -be
    return EllipticCoefficients(grid, eps, axx, axe, aee, be, rhs)


def operator_matrix(coef: EllipticCoefficients) -> sp.csc_matrix:
    """Nine-point matrix on interior nodes (Dirichlet data eliminated)."""
    grid = coef.grid
    nx, ne = grid.shape
    h, k = grid.h, grid.k
    mi, mj = nx - 2, ne - 2
    I, J = np.meshgrid(np.arange(1, nx - 1), np.arange(1, ne - 1), indexing="ij")
    sl = (slice(1, -1), slice(1, -1))
    axx, axe, aee, be = (c[sl] for c in (coef.axx, coef.axe, coef.aee, coef.be))
    cross = axe / (4.0 * h * k)
    stencil = [
        (0, 0, -2.0 * axx / h**2 - 2.0 * aee / k**2),
        (-1, 0, axx / h**2),
        (1, 0, axx / h**2),
        (0, -1, aee / k**2 - be / (2.0 * k)),
        (0, 1, aee / k**2 + be / (2.0 * k)),
        (1, 1, cross),
        (-1, -1, cross),
        (1, -1, -cross),
        (-1, 1, -cross),
    ]
    rows, cols, vals = [], [], []
    row_index = (I - 1) * mj + (J - 1)
    for di, dj, c in stencil:
        Ii, Jj = I + di, J + dj
        inside = (Ii >= 1) & (Ii <= nx - 2) & (Jj >= 1) & (Jj <= ne - 2)
        rows.append(row_index[inside])
        cols.append(((Ii - 1) * mj + (Jj - 1))[inside])
        vals.append(np.broadcast_to(c, I.shape)[inside])
    n = mi * mj
    return sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def solve_phi(coef: EllipticCoefficients, rhs: np.ndarray | None = None,
              v: DeflectionProfile | None = None, rtol: float = 1e-10) -> PotentialSolution:
    """Solve the Dirichlet problem L_v Phi = f_v with Phi = 0 on the boundary."""
    grid = coef.grid
    rhs = coef.rhs if rhs is None else rhs
    phi = np.zeros(grid.shape)
    b = rhs[1:-1, 1:-1].ravel()
    if not np.any(b):
        return PotentialSolution(GridFunction2D(phi, grid), coef.eps, v, 0.0)
    A = operator_matrix(coef)
    try:
        x = spla.spsolve(A, b)
    except RuntimeError as exc:  # singular factor
        raise SolverFailure(f"sparse LU failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        cond = _condition_estimate(A)
        raise SolverFailure(f"non-finite potential; 1-norm condition estimate {cond:.3g}")
    res = np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300)
    if res > rtol:
        cond = _condition_estimate(A)
        raise SolverFailure(
            f"relative residual {res:.3g} > {rtol:.1g}; 1-norm condition estimate {cond:.3g}"
        )
    phi[1:-1, 1:-1] = x.reshape(grid.shape[0] - 2, grid.shape[1] - 2)
    return PotentialSolution(GridFunction2D(phi, grid), coef.eps, v, float(res))


def _condition_estimate(A) -> float:
    try:
        lu = spla.splu(A.tocsc())
        inv = spla.LinearOperator(A.shape, matvec=lu.solve, rmatvec=lambda y: lu.solve(y, trans="T"))
        return float(spla.onenormest(A) * spla.onenormest(inv))
    except Exception:
        return float("inf")


def reconstruct_psi_fields(sol: PotentialSolution, v: DeflectionProfile) -> PotentialSolution:
    """Physical derivatives of psi in (x, eta) coordinates from Phi."""
    grid = sol.grid
    phi = sol.phi.values
    h, k = grid.h, grid.k
    p_e = diff_values(phi, k, 1, axis=1)
    p_ee = diff_values(phi, k, 2, axis=1)
    p_x = diff_values(phi, h, 1, axis=0)
    p_xe = diff_values(p_e, h, 1, axis=0)
    one_v = (1.0 + v.values)[:, None]
    V = v.V.values[:, None]
    dv = v.du.values[:, None]
    eta = grid.eta_nodes[None, :]
    dx_psi = p_x - eta * V * p_e - eta * V
    dz_psi = (1.0 + p_e) / one_v
    dxdz_psi = (p_xe - eta * V * p_ee - V * p_e) / one_v - dv / one_v**2
    dzz_psi = p_ee / one_v**2
    return replace(
        sol,
        v=v,
        dx_psi=GridFunction2D(dx_psi, grid),
        dz_psi=GridFunction2D(dz_psi, grid),
        dxdz_psi=GridFunction2D(dxdz_psi, grid),
        dzz_psi=GridFunction2D(dzz_psi, grid),
        phi_eta=p_e,
        phi_etaeta=p_ee,
        phi_xeta=p_xe,
    )


def trace_gamma(sol: PotentialSolution) -> GridFunction1D:
    """Gamma(x) = Phi_eta(x, 1) by the one-sided three-point formula."""
    phi = sol.phi.values
    k = sol.grid.k
    gamma = (3.0 * phi[:, -1] - 4.0 * phi[:, -2] + phi[:, -3]) / (2.0 * k)
    return GridFunction1D(gamma, sol.grid.grid_x)


def compute_g_eps(sol: PotentialSolution, v: DeflectionProfile, eps: float) -> GridFunction1D:
    """Electrostatic force density (1/(1+v)^2 + eps^2 V^2) (1 + Gamma)^2."""
    gamma = sol.gamma if sol.gamma is not None else trace_gamma(sol)
    one_v = 1.0 + v.values
    g = (1.0 / one_v**2 + eps**2 * v.V.values**2) * (1.0 + gamma.values) ** 2
    return GridFunction1D(g, v.grid)


def solve_potential(v: DeflectionProfile, eps: float, n_eta: int) -> PotentialSolution:
    """Full pipeline: coefficients, Phi, reconstructed fields, Gamma, g_eps."""
    grid = RectGrid(v.grid, n_eta)
    coef = compute_coefficients(v, eps, grid)
    sol = solve_phi(coef, v=v)
    sol = reconstruct_psi_fields(sol, v)
    sol.gamma = trace_gamma(sol)
    sol.g_eps = compute_g_eps(sol, v, eps)
    return sol


def limit_force(v: DeflectionProfile) -> GridFunction1D:
    """g_0(v) = 1 / (1 + v)^2, the eps = 0 force density."""
    return GridFunction1D(1.0 / (1.0 + v.values) ** 2, v.grid)


def force_density(v: DeflectionProfile, eps: float, n_eta: int) -> GridFunction1D:
    if eps == 0.0:
        return limit_force(v)
    return solve_potential(v, eps, n_eta).g_eps


def weighted_integral(values: np.ndarray, v: DeflectionProfile, grid: RectGrid) -> float:
    """Integral over Omega(v) of a field given in (x, eta) coordinates."""
    return float(np.sum(grid.weights() * values * (1.0 + v.values)[:, None]))


def physical_l2(values: np.ndarray, v: DeflectionProfile, grid: RectGrid) -> float:
    return float(np.sqrt(weighted_integral(values * values, v, grid)))


def limit_potential_gap(u: DeflectionProfile, u_ref: DeflectionProfile, eps: float, n_eta: int,
                        sol: PotentialSolution | None = None) -> tuple[float, float]:
    """Distance of psi_eps(u) from the limit potential of a reference profile.

    Returns ||psi - b_ref|| and ||dz psi - 1/(1 + u_ref)|| in L2(Omega(u)),
    with b_ref(x, z) = (1 + z)/(1 + u_ref(x)).
    """
    grid = RectGrid(u.grid, n_eta)
    if sol is None and eps > 0:
        sol = solve_potential(u, eps, n_eta)
    eta = grid.eta_nodes[None, :]
    one_u = (1.0 + u.values)[:, None]
    one_ref = (1.0 + u_ref.values)[:, None]
    if sol is None:
        phi, phi_eta = np.zeros(grid.shape), np.zeros(grid.shape)
    else:
        if sol.phi_eta is None:
            sol = reconstruct_psi_fields(sol, u)
        phi, phi_eta = sol.phi.values, sol.phi_eta
    psi_gap = phi + eta * (1.0 - one_u / one_ref)
    dz_gap = (1.0 + phi_eta) / one_u - 1.0 / one_ref
    return physical_l2(psi_gap, u, grid), physical_l2(dz_gap, u, grid)


def electrostatic_energy(sol: PotentialSolution, v: DeflectionProfile, eps: float) -> float:
    if sol.dz_psi is None:
        sol = reconstruct_psi_fields(sol, v)
    dens = eps**2 * sol.dx_psi.values**2 + sol.dz_psi.values**2
    return weighted_integral(dens, v, sol.grid)


def energy_bracket(v: DeflectionProfile, eps: float) -> tuple[float, float]:
    """Lower and upper bounds int 1/(1+v) and int (1 + eps^2 v_x^2)/(1+v)."""
    one_v = 1.0 + v.values
    lo = integrate_1d(GridFunction1D(1.0 / one_v, v.grid))
    hi = integrate_1d(GridFunction1D((1.0 + eps**2 * v.du.values**2) / one_v, v.grid))
    return lo, hi


def energy_identity_sides(sol: PotentialSolution, v: DeflectionProfile, eps: float):
    if sol.dxdz_psi is None:
        sol = reconstruct_psi_fields(sol, v)
    lhs = weighted_integral(eps**2 * sol.dxdz_psi.values**2 + sol.dzz_psi.values**2, v, sol.grid)
    gamma = sol.gamma if sol.gamma is not None else trace_gamma(sol)
    gm = (1.0 + gamma.values) / (1.0 + v.values)
    rhs = 0.5 * eps**2 * integrate_1d(GridFunction1D(gm**2 * v.d2u.values, v.grid))
    return lhs, rhs


def energy_identity_residual(sol: PotentialSolution, v: DeflectionProfile, eps: float,
                             slope_tol: float | None = None) -> float:
    """Relative mismatch of the dz-psi energy identity.

    int_{Omega(v)} eps^2 |psi_xz|^2 + |psi_zz|^2  vs  eps^2/2 int gamma_m^2 v_xx,
    which needs clamped slopes v_x(+-1) = 0.
    """
    if slope_tol is None:
        slope_tol = 10.0 * v.grid.h * max(1.0, float(np.abs(v.values).max()))
    ends = (abs(v.values[0]), abs(v.values[-1]), abs(v.du.values[0]), abs(v.du.values[-1]))
    if max(ends[:2]) > 1e-12 or max(ends[2:]) > slope_tol:
        raise PreconditionError("energy identity needs a clamped profile (v = v_x = 0 at x = +-1)")
    lhs, rhs = energy_identity_sides(sol, v, eps)
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-300)


def prop2_errors(sol: PotentialSolution, v: DeflectionProfile, eps: float,
                 sigmas=(0.0, 0.25)) -> dict[str, float]:
    """Deviations of psi from the limit potential b_v = (1 + z)/(1 + v).

    Keys: ``err_psi_l2``, ``err_dzpsi_l2``, ``err_dxdz_l2``, ``err_dzz_l2`` and
    ``err_g_h<sigma>`` for each sigma (``err_g_h0``, ``err_g_h025``, ...).
    """
    if sol.dz_psi is None:
        sol = reconstruct_psi_fields(sol, v)
    grid = sol.grid
    one_v = (1.0 + v.values)[:, None]
    out = {
        "err_psi_l2": physical_l2(sol.phi.values, v, grid),
        "err_dzpsi_l2": physical_l2(sol.dz_psi.values - 1.0 / one_v, v, grid),
        "err_dxdz_l2": physical_l2(sol.dxdz_psi.values + v.du.values[:, None] / one_v**2, v, grid),
        "err_dzz_l2": physical_l2(sol.dzz_psi.values, v, grid),
    }
    g = sol.g_eps if sol.g_eps is not None else compute_g_eps(sol, v, eps)
    diff = g - limit_force(v)
    for s in sigmas:
        out[sigma_key(s)] = sobolev_norm(diff, s)
    return out


def sigma_key(sigma: float) -> str:
    return "err_g_h" + f"{sigma:g}".replace(".", "")


def manufactured_error(grid: RectGrid, eps: float, amplitude: float = 0.3) -> float:
    """L2(Omega) error of the solver on Phi* = (1 - x^2) eta (1 - eta).

    The profile is v = -amplitude (1 - x^2)^2. The right-hand side applies
    the continuous operator (exact v derivatives) to Phi*, while the solver
    uses the finite-difference coefficients, so the error measures the full
    discretization.
    """
    x = grid.grid_x.nodes
    v = DeflectionProfile.from_function(lambda s: -amplitude * (1 - s**2) ** 2, grid.grid_x)
    dv_exact = 4.0 * amplitude * x * (1 - x**2)
    d2v_exact = 4.0 * amplitude * (1 - 3 * x**2)
    exact = compute_coefficients(v, eps, grid, dv=dv_exact, d2v=d2v_exact)
    X, E = grid.mesh()
    p = (1 - X**2) * E * (1 - E)
    p_xx = -2.0 * E * (1 - E)
    p_xe = -2.0 * X * (1 - 2 * E)
    p_ee = -2.0 * (1 - X**2)
    p_e = (1 - X**2) * (1 - 2 * E)
    rhs = exact.axx * p_xx + exact.axe * p_xe + exact.aee * p_ee + exact.be * p_e
    coef = compute_coefficients(v, eps, grid)
    sol = solve_phi(coef, rhs=rhs)
    err = sol.phi.values - p
    return float(np.sqrt(np.sum(grid.weights() * err * err)))
