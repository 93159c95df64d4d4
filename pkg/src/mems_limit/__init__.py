"""Numerical study of the small aspect ratio limit of an electrostatic MEMS
beam model: transformed free-boundary potential, clamped beam operator,
stationary states, pull-in, and damped evolution."""

from .beam import (
    DeflectionProfile,
    ModelParams,
    TouchdownError,
    apply_beam_operator,
    assemble_beam_matrix,
    check_admissible,
    mechanical_energy,
)
from .evolution import QuenchBeforeT, advance_hyperbolic, advance_parabolic, compare_evolutions, run_evolution
from .grids import (
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
from .poisson import (
    PreconditionError,
    SolverFailure,
    compute_coefficients,
    compute_g_eps,
    electrostatic_energy,
    energy_identity_residual,
    solve_phi,
    solve_potential,
    trace_gamma,
)
from .records import ErrorRecord, RateFit
from .stationary import (
    NoConvergence,
    find_pullin_threshold,
    solve_coupled_stationary,
    solve_limit_constrained,
    solve_limit_stationary,
    verify_minimizer,
)

__version__ = "0.1.0"

__all__ = [
    "DeflectionProfile",
    "ModelParams",
    "TouchdownError",
    "apply_beam_operator",
    "assemble_beam_matrix",
    "check_admissible",
    "mechanical_energy",
    "QuenchBeforeT",
    "advance_hyperbolic",
    "advance_parabolic",
    "compare_evolutions",
    "run_evolution",
    "ConfigurationError",
    "GridFunction1D",
    "GridFunction2D",
    "IntervalGrid",
    "RectGrid",
    "UnsupportedOrderError",
    "derivative_1d",
    "integrate_1d",
    "integrate_rect",
    "sobolev_norm",
    "PreconditionError",
    "SolverFailure",
    "compute_coefficients",
    "compute_g_eps",
    "electrostatic_energy",
    "energy_identity_residual",
    "solve_phi",
    "solve_potential",
    "trace_gamma",
    "ErrorRecord",
    "RateFit",
    "NoConvergence",
    "find_pullin_threshold",
    "solve_coupled_stationary",
    "solve_limit_constrained",
    "solve_limit_stationary",
    "verify_minimizer",
]
