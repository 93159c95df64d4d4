"""Stationary states: limit model, rho-constrained limit model, coupled
eps > 0 problem and pull-in threshold localization."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .beam import (
    BeamMatrix,
    DeflectionProfile,
    ModelParams,
    TouchdownError,
    assemble_beam_matrix,
    mechanical_energy,
    profile_from_interior,
    stretch_norm_sq,
)
from .grids import ConfigurationError, IntervalGrid
from .poisson import PotentialSolution, solve_potential

log = logging.getLogger(__name__)


class NoConvergence(RuntimeError):
    """Newton or Picard iteration failed; ``last`` holds the last iterate."""

    def __init__(self, message: str, last: np.ndarray | None = None, lam: float | None = None):
        super().__init__(message)
        self.last = last
        self.lam = lam


@dataclass
class StationarySolution:
    u: DeflectionProfile
    lam: float
    eps: float = 0.0
    rho: float | None = None
    newton_iters: int = 0
    residual_norm: float = 0.0
    potential: PotentialSolution | None = None


@dataclass
class PullInReport:
    eps: float
    lambda_star: float
    bracket_width: float
    lam_low: float
    lam_high: float
    branch: list[tuple[float, float, float]] = field(default_factory=list)


def gradient_matrix(grid: IntervalGrid) -> sp.csr_matrix:
    """Matrix of the first-derivative stencil acting on all nodes."""
    n = grid.n_nodes
    h = grid.h
    rows, cols, vals = [], [], []
    for i in range(1, n - 1):
        rows += [i, i]
        cols += [i - 1, i + 1]
        vals += [-0.5 / h, 0.5 / h]
    rows += [0, 0, 0, n - 1, n - 1, n - 1]
    cols += [0, 1, 2, n - 1, n - 2, n - 3]
    vals += [-1.5 / h, 2.0 / h, -0.5 / h, 1.5 / h, -2.0 / h, 0.5 / h]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


class BeamSystem:
    """Residual pieces shared by the stationary and evolution solvers.

    Works on interior unknowns y = u[1:-1].
    """

    def __init__(self, params: ModelParams, grid: IntervalGrid):
        self.params = params
        self.grid = grid
        self.beam: BeamMatrix = assemble_beam_matrix(params, grid)
        self.K = self.beam.matrix
        self.D2 = self.beam.d2
        self.absK = abs(self.K)
        G = gradient_matrix(grid)[:, 1:-1]
        self.GtWG = (G.T @ sp.diags(grid.weights()) @ G).tocsr()
        self.w_int = grid.weights()[1:-1]
        self.w_ends = grid.weights()[0] + grid.weights()[-1]

    def full(self, y: np.ndarray) -> np.ndarray:
        u = np.zeros(self.grid.n_nodes)
        u[1:-1] = y
        return u

    def stretch(self, y: np.ndarray) -> float:
        return stretch_norm_sq(self.full(y), self.grid)

    def elastic(self, y: np.ndarray) -> np.ndarray:
        """beta D4 y - (tau + a ||y'||^2) D2 y."""
        out = self.K @ y
        if self.params.a > 0:
            out = out - self.params.a * self.stretch(y) * (self.D2 @ y)
        return out

    def elastic_scale(self, y: np.ndarray) -> np.ndarray:
        scale = self.absK @ np.abs(y)
        if self.params.a > 0:
            scale = scale + self.params.a * self.stretch(y) * (abs(self.D2) @ np.abs(y))
        return scale

    def backward_error(self, R, y, lam, src) -> float:
        """Componentwise-scaled residual ||R|| / || |K||y| + lam |src| ||."""
        scale = self.elastic_scale(y) + lam * np.abs(src)
        den = np.sqrt(np.dot(self.w_int, scale**2))
        num = np.sqrt(np.dot(self.w_int, R**2))
        return float(num / den) if den > 0 else float(num)

    def jacobian_parts(self, y: np.ndarray, diag: np.ndarray):
        """Sparse part J0 and the rank-one self-stretching factors (c, d).

        The full Jacobian is J0 - a c d^T.
        """
        J0 = self.K + sp.diags(diag)
        if self.params.a > 0:
            J0 = J0 - self.params.a * self.stretch(y) * self.D2
            c = self.D2 @ y
            d = 2.0 * (self.GtWG @ y)
            return J0.tocsc(), c, d
        return J0.tocsc(), None, None

    def constraint(self, y: np.ndarray, rho: float) -> float:
        return float(np.dot(self.w_int, 1.0 / (1.0 + y)) + self.w_ends - rho)


def _bordered_solve(J0, rhs, cols=(), rows=(), corner=None):
    """Solve [[J0, C], [R^T, D]] [x; z] = rhs with a few dense borders."""
    m = J0.shape[0]
    p = len(cols)
    if p == 0:
        return spla.spsolve(J0, rhs), np.zeros(0)
    C = np.column_stack(cols)
    Rt = np.vstack(rows)
    D = np.zeros((p, p)) if corner is None else corner
    A = sp.bmat([[J0, sp.csc_matrix(C)], [sp.csc_matrix(Rt), sp.csc_matrix(D)]], format="csc")
    sol = spla.spsolve(A, rhs)
    return sol[:m], sol[m:]


def _newton_step(system: BeamSystem, y, R, diag):
    J0, c, d = system.jacobian_parts(y, diag)
    if c is None:
        return spla.spsolve(J0, -R)
    a = system.params.a
    # auxiliary unknown mu = d . delta carries the dense rank-one term
    rhs = np.concatenate([-R, [0.0]])
    delta, _ = _bordered_solve(J0, rhs, cols=[-a * c], rows=[d], corner=np.array([[-1.0]]))
    return delta


def solve_limit_stationary(lam: float, params: ModelParams, grid: IntervalGrid,
                           init: DeflectionProfile | None = None, tol: float = 1e-10,
                           step_tol: float = 1e-10, max_iter: int = 50,
                           system: BeamSystem | None = None) -> StationarySolution:
    """Damped Newton for beta u'''' - (tau + a||u'||^2) u'' + lam/(1+u)^2 = 0.

    ``residual_norm`` is the componentwise backward error of the discrete
    equation (absolute residuals carry roundoff of order |K||u| ~ h^-4).
    """
    if lam < 0:
        raise ConfigurationError(f"lambda must be >= 0, got {lam}")
    system = system or BeamSystem(params, grid)
    y = np.zeros(grid.n_cells - 1) if init is None else np.array(init.interior, dtype=float)
    if y.size and y.min() <= -1.0:
        raise TouchdownError("initial guess touches the ground plate")

    def residual(y):
        src = 1.0 / (1.0 + y) ** 2
        return system.elastic(y) + lam * src, src

    R, src = residual(y)
    err = system.backward_error(R, y, lam, src)
    last_step = np.inf
    for it in range(max_iter + 1):
        if lam == 0.0 and not np.any(y):
            return StationarySolution(profile_from_interior(y, grid), lam, 0.0, None, it, 0.0)
        if err <= tol and last_step <= step_tol:
            return StationarySolution(profile_from_interior(y, grid), lam, 0.0, None, it, err)
        if it == max_iter:
            break
        delta = _newton_step(system, y, R, -2.0 * lam / (1.0 + y) ** 3)
        if not np.all(np.isfinite(delta)):
            raise NoConvergence("singular Newton system", y, lam)
        rnorm = np.linalg.norm(R)
        t = 1.0
        while True:
            y_new = y + t * delta
            if y_new.min() > -1.0:
                R_new, src_new = residual(y_new)
                small = t * np.abs(delta).max() <= step_tol
                if small or np.linalg.norm(R_new) <= (1.0 - 1e-4 * t) * rnorm:
                    break
            t *= 0.5
            if t < 1.0 / 1024:
                raise NoConvergence(f"line search failed at lambda={lam:.6g} (iter {it})", y, lam)
        last_step = t * np.abs(delta).max()
        y, R, src = y_new, R_new, src_new
        err = system.backward_error(R, y, lam, src)
        if y.min() <= -1.0 + 1e-12:
            raise NoConvergence("iterate touched down", y, lam)
    raise NoConvergence(f"no convergence in {max_iter} iterations at lambda={lam:.6g}", y, lam)


def _theta_for_rho(shape: np.ndarray, rho: float, system: BeamSystem) -> float:
    """Scalar theta with int dx / (1 + theta*shape) = rho (shape <= 0)."""
    lo_shape = shape.min()
    if lo_shape >= 0:
        raise ValueError("shape must be negative somewhere")
    top = (1.0 - 1e-12) / -lo_shape
    f = lambda th: system.constraint(th * shape, rho)
    if f(top) < 0:
        raise ValueError("constraint value not reachable by rescaling")
    return brentq(f, 0.0, top, xtol=1e-15, rtol=1e-15)


def solve_limit_constrained(rho: float, params: ModelParams, grid: IntervalGrid,
                            tol: float = 1e-10, constraint_tol: float = 1e-8,
                            max_iter: int = 60, init: StationarySolution | None = None,
                            system: BeamSystem | None = None) -> StationarySolution:
    """Newton on (u, lam) with the side condition int dx/(1+u) = rho."""
    if not rho > 2.0:
        raise ConfigurationError(
            f"rho must exceed 2 (rho = 2 forces u = 0 and lambda = 0), got {rho}"
        )
    system = system or BeamSystem(params, grid)
    if init is not None:
        y, lam = np.array(init.u.interior), float(init.lam)
    else:
        shape = -(1.0 - grid.nodes[1:-1] ** 2) ** 2
        y = _theta_for_rho(shape, rho, system) * shape
        src = 1.0 / (1.0 + y) ** 2
        lam = max(-np.dot(src, system.elastic(y)) / np.dot(src, src), 0.0)

    def residuals(y, lam):
        src = 1.0 / (1.0 + y) ** 2
        return system.elastic(y) + lam * src, system.constraint(y, rho), src

    R, C, src = residuals(y, lam)
    for it in range(max_iter + 1):
        err = system.backward_error(R, y, lam, src)
        if err <= tol and abs(C) <= constraint_tol:
            sol = StationarySolution(profile_from_interior(y, grid), lam, 0.0, rho, it, err)
            return sol
        if it == max_iter:
            break
        J0, c, d = system.jacobian_parts(y, -2.0 * lam / (1.0 + y) ** 3)
        cvec = -system.w_int / (1.0 + y) ** 2
        if c is None:
            rhs = np.concatenate([-R, [-C]])
            delta, z = _bordered_solve(J0, rhs, cols=[src], rows=[cvec], corner=np.zeros((1, 1)))
        else:
            a = system.params.a
            rhs = np.concatenate([-R, [-C, 0.0]])
            delta, z = _bordered_solve(
                J0, rhs, cols=[src, -a * c], rows=[cvec, d],
                corner=np.array([[0.0, 0.0], [0.0, -1.0]]),
            )
        dlam = z[0]
        merit = np.hypot(np.linalg.norm(R), abs(C))
        t = 1.0
        while True:
            y_new, lam_new = y + t * delta, lam + t * dlam
            if y_new.min() > -1.0:
                R_new, C_new, src_new = residuals(y_new, lam_new)
                small = t * max(np.abs(delta).max(), abs(dlam)) <= 1e-13
                if small or np.hypot(np.linalg.norm(R_new), abs(C_new)) <= (1 - 1e-4 * t) * merit:
                    break
            t *= 0.5
            if t < 1.0 / 1024:
                raise NoConvergence(f"constrained line search failed at rho={rho}", y, lam)
        y, lam, R, C, src = y_new, lam_new, R_new, C_new, src_new
    raise NoConvergence(f"constrained Newton did not converge for rho={rho}", y, lam)


def solve_coupled_stationary(lam: float, eps: float, params: ModelParams, grid: IntervalGrid,
                             n_eta: int, init: DeflectionProfile | None = None,
                             step_tol: float = 1e-9, tol: float = 1e-8, max_iter: int = 200,
                             system: BeamSystem | None = None) -> StationarySolution:
    """Stationary state of the eps > 0 model with lagged force density.

    Each sweep solves the transformed Poisson problem at the current iterate
    for g_eps(u^k) and takes one quasi-Newton step whose Jacobian uses
    d/du (1+u)^-2 scaled by g_eps(u^k) (1+u)^2 as a stand-in for the
    unavailable shape derivative.
    """
    if not 0 < eps < 1:
        raise ConfigurationError(f"eps must lie in (0, 1), got {eps}")
    if lam < 0:
        raise ConfigurationError(f"lambda must be >= 0, got {lam}")
    system = system or BeamSystem(params, grid)
    y = np.zeros(grid.n_cells - 1) if init is None else np.array(init.interior, dtype=float)
    if lam == 0.0 and not np.any(y):
        u = profile_from_interior(y, grid)
        return StationarySolution(u, lam, eps, None, 0, 0.0, solve_potential(u, eps, n_eta))
    last_step = np.inf
    for it in range(max_iter + 1):
        u = profile_from_interior(y, grid)
        pot = solve_potential(u, eps, n_eta)
        g = pot.g_eps.values[1:-1]
        R = system.elastic(y) + lam * g
        err = system.backward_error(R, y, lam, g)
        if err <= tol and last_step <= step_tol:
            return StationarySolution(u, lam, eps, None, it, err, pot)
        if it == max_iter:
            break
        delta = _newton_step(system, y, R, -2.0 * lam * g / (1.0 + y))
        t = 1.0
        while (y + t * delta).min() <= -1.0 + 1e-9:
            t *= 0.5
            if t < 1.0 / 1024:
                raise NoConvergence(f"coupled iterate touched down (lambda={lam}, eps={eps})", y, lam)
        y = y + t * delta
        last_step = t * np.abs(delta).max()
        if not np.all(np.isfinite(y)):
            raise NoConvergence("coupled iteration diverged", None, lam)
    raise NoConvergence(f"coupled iteration stalled (lambda={lam}, eps={eps})", y, lam)


def _stationary(lam, eps, params, grid, n_eta, init, system):
    if eps == 0.0:
        return solve_limit_stationary(lam, params, grid, init=init, system=system)
    return solve_coupled_stationary(lam, eps, params, grid, n_eta, init=init, system=system)


def find_pullin_threshold(eps: float, params: ModelParams, grid: IntervalGrid, tol: float = 1e-3,
                          lam_guess: float = 10.0, n_eta: int = 32) -> PullInReport:
    """Locate the largest lambda with a stationary state on the minimal branch.

    Continuation in lambda with fixed steps 0.05*lam_guess (warm-started
    Newton), then bisection between the last success and the first failure.
    Failure of the solver is the signal; it is not re-raised.
    """
    if not tol > 0:
        raise ConfigurationError("tol must be > 0")
    system = BeamSystem(params, grid)
    step = 0.05 * lam_guess
    lam_ok, sol_ok = 0.0, None
    branch = [(0.0, 0.0, 0.0)]
    lam_bad = None
    while lam_bad is None:
        trial = lam_ok + step
        try:
            sol = _stationary(trial, eps, params, grid, n_eta, sol_ok.u if sol_ok else None, system)
        except (NoConvergence, TouchdownError):
            lam_bad = trial
            break
        lam_ok, sol_ok = trial, sol
        branch.append((trial, float(sol.u.values.min()), mechanical_energy(sol.u, params)))
        if trial > 1e6:
            raise ConfigurationError("no pull-in found below lambda = 1e6")
    while lam_bad - lam_ok > tol:
        mid = 0.5 * (lam_ok + lam_bad)
        try:
            sol = _stationary(mid, eps, params, grid, n_eta, sol_ok.u if sol_ok else None, system)
        except (NoConvergence, TouchdownError):
            lam_bad = mid
            continue
        lam_ok, sol_ok = mid, sol
        branch.append((mid, float(sol.u.values.min()), mechanical_energy(sol.u, params)))
    branch.sort()
    return PullInReport(eps, 0.5 * (lam_ok + lam_bad), lam_bad - lam_ok, lam_ok, lam_bad, branch)


def dense_scan_threshold(params: ModelParams, grid: IntervalGrid, dlam: float = 1e-3,
                         start: float = 0.0) -> tuple[float, float]:
    """Brute-force threshold: march lambda by ``dlam`` until Newton fails.

    Returns (last lambda with a solution, first lambda without).
    """
    system = BeamSystem(params, grid)
    lam, init = start, None
    if start > 0:
        init = solve_limit_stationary(start, params, grid, system=system).u
    while True:
        nxt = lam + dlam
        try:
            init = solve_limit_stationary(nxt, params, grid, init=init, system=system).u
        except (NoConvergence, TouchdownError):
            return lam, nxt
        lam = nxt


@dataclass
class MinimizerCheck:
    ok: bool
    margin: float
    energy: float
    gaps: list[float]
    skipped: int


def verify_minimizer(sol: StationarySolution, params: ModelParams, trial_count: int = 20,
                     delta: float = 0.2, seed: int = 0, tol: float = 1e-8) -> MinimizerCheck:
    """Compare E_m(u) with even clamped trials rescaled onto int dx/(1+v) = rho.

    Trials: u itself, the one-parameter family theta*(1-x^2)^2 and
    perturbations u + delta*|u|_inf*b of u by random even clamped bumps b.
    """
    if sol.rho is None:
        raise ValueError("verify_minimizer needs a solution from solve_limit_constrained")
    grid = sol.u.grid
    system = BeamSystem(params, grid)
    x = grid.nodes
    e_u = mechanical_energy(sol.u, params)
    y = sol.u.interior
    amp = float(np.abs(y).max())
    rng = np.random.default_rng(seed)
    shapes = [y.copy(), -(1.0 - x[1:-1] ** 2) ** 2]
    for _ in range(max(trial_count - 2, 0)):
        c = rng.normal(size=4)
        bump = (1.0 - x**2) ** 2 * (c[0] + c[1] * x**2 + c[2] * x**4 + c[3] * np.cos(np.pi * x))
        bump /= np.abs(bump).max()
        shapes.append(y + delta * amp * bump[1:-1])
    gaps, skipped = [], 0
    for shape in shapes:
        if shape.max() > 0 or shape.min() <= -1.0:
            warnings.warn("trial leaves -1 < v <= 0; skipped", stacklevel=2)
            skipped += 1
            continue
        try:
            theta = _theta_for_rho(shape, sol.rho, system)
        except ValueError:
            warnings.warn("trial cannot be rescaled onto the constraint; skipped", stacklevel=2)
            skipped += 1
            continue
        trial = profile_from_interior(theta * shape, grid)
        gaps.append(mechanical_energy(trial, params) - e_u)
    margin = min(gaps) if gaps else float("nan")
    return MinimizerCheck(bool(gaps) and margin >= -tol, margin, e_u, gaps, skipped)
