"""Eps-sweeps, log-log rate fits and CSV/JSON report emission."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .beam import DeflectionProfile, TouchdownError, check_admissible
from .config import RunConfig, config_to_text
from .evolution import QuenchBeforeT, compare_evolutions
from .grids import GridFunction1D, integrate_1d, sobolev_norm
from .poisson import (
    PreconditionError,
    electrostatic_energy,
    limit_potential_gap,
    manufactured_error,
    prop2_errors,
    sigma_key,
    solve_potential,
)
from .records import EVOLUTION_COLUMNS, PROP2_COLUMNS, STATIONARY_COLUMNS, ErrorRecord, RateFit
from .stationary import (
    NoConvergence,
    dense_scan_threshold,
    find_pullin_threshold,
    solve_coupled_stationary,
    solve_limit_stationary,
)

log = logging.getLogger(__name__)

PULLIN_COLUMNS = ("eps", "lambda_star", "bracket_width", "lam_low", "lam_high")


class InsufficientData(ValueError):
    pass


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "0+unknown"


def fit_loglog_rate(points, name: str = "", exclude=()) -> RateFit:
    """Least-squares line through (log eps, log value).

    Points whose eps is in ``exclude`` (below the discretization floor) and
    zero values are dropped. All-zero input returns a fit flagged
    ``below_floor`` with infinite slope.
    """
    pts = tuple((float(e), float(v)) for e, v in points)
    excluded = tuple(float(e) for e in exclude)
    if pts and all(v == 0.0 for _, v in pts):
        return RateFit(name, pts, math.inf, -math.inf, 1.0, True, excluded)
    use = [(e, v) for e, v in pts if v > 0 and e > 0 and e not in excluded]
    if len(use) < 3:
        raise InsufficientData(f"{name or 'fit'}: need >= 3 positive points, got {len(use)}")
    x = np.log([e for e, _ in use])
    y = np.log([v for _, v in use])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return RateFit(name, pts, float(slope), float(intercept), float(min(max(r2, 0.0), 1.0)), False, excluded)


@dataclass
class Clause:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class SweepReport:
    experiment: str
    records: list
    fits: list = field(default_factory=list)
    targets: dict = field(default_factory=dict)
    clauses: list = field(default_factory=list)
    columns: tuple = ()
    failures: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)


def strictly_decreasing(values) -> bool:
    vals = list(values)
    return all(a > b for a, b in zip(vals, vals[1:]))


def _map(func, jobs, threads: int):
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, jobs))
    return [func(j) for j in jobs]


def random_profiles(seed: int, count: int, grid, max_depth: float = 0.69) -> list[DeflectionProfile]:
    """Smooth even clamped bumps with minimum in (-max_depth, -0.05)."""
    rng = np.random.default_rng(seed)
    x = grid.nodes
    out = []
    for _ in range(count):
        c = rng.uniform(0.0, 1.0, size=3)
        shape = (1 - x**2) ** 2 * (0.2 + c[0] + c[1] * x**2 + c[2] * x**4)
        depth = rng.uniform(0.05, max_depth)
        out.append(DeflectionProfile.from_values(-depth * shape / shape.max(), grid))
    return out


def sweep_profile(cfg: RunConfig, amplitude: float | None = None) -> DeflectionProfile:
    c = cfg.profile_amplitude if amplitude is None else amplitude
    return DeflectionProfile.from_function(lambda x: -c * (1 - x**2) ** 2, cfg.interval_grid())


# Potential convergence sweep ---------------------------------------------

def prop2_targets(nu: float) -> dict:
    """One-sided slope targets: proven exponent minus 0.1."""
    return {
        "err_psi_l2": 0.9,
        "err_dzpsi_l2": 0.9,
        "err_dxdz_l2": (1 - 2 * nu) / (3 - 2 * nu) - 0.1,
        "err_g_h025": (1 - 2 * nu) / (3 - 2 * nu) - 0.1,
        "err_dzz_l2": 4 * (1 - nu) / (3 - 2 * nu) - 0.1,
        "err_g_h0": None,
    }


R2_MIN = {"err_psi_l2": 0.98, "err_dzpsi_l2": 0.98}


def _prop2_point(args):
    cfg, eps = args
    v = sweep_profile(cfg)
    sol = solve_potential(v, eps, cfg.n_eta)
    errs = prop2_errors(sol, v, eps, cfg.sigmas)
    return eps, errs


def run_prop2_sweep(cfg: RunConfig) -> list[ErrorRecord]:
    """Error norms of psi_eps(v) against the limit potential, one record per eps."""
    v = sweep_profile(cfg)
    adm = check_admissible(v, 1.75, cfg.kappa)
    if not adm:
        raise PreconditionError(f"test profile not admissible: failed {', '.join(adm.failed)}")
    eps_list = [e for e in cfg.eps]
    if any(e <= 0 for e in eps_list):
        raise PreconditionError("prop2 sweep needs eps > 0")
    results = _map(_prop2_point, [(cfg, e) for e in eps_list], cfg.threads)
    results.sort(key=lambda r: -r[0])
    out = []
    for eps, errs in results:
        known = {k: errs[k] for k in PROP2_COLUMNS[1:] if k in errs}
        out.append(ErrorRecord(eps=eps, **known))
    return out


def discretization_floor(cfg: RunConfig, eps: float) -> float:
    return cfg.floor_factor * manufactured_error(cfg.rect_grid(), eps)


def prop2_report(cfg: RunConfig, records: list[ErrorRecord] | None = None) -> SweepReport:
    t0 = time.perf_counter()
    if records is None:
        records = run_prop2_sweep(cfg)
    t1 = time.perf_counter()
    floors = {r.eps: discretization_floor(cfg, r.eps) for r in records}
    rep = SweepReport("prop2", records, columns=PROP2_COLUMNS, targets=prop2_targets(cfg.nu))
    rep.extra["floors"] = floors
    rep.clauses.extend(_prop2_clauses(records, floors, rep))
    rep.timings = {"sweep": t1 - t0, "fits": time.perf_counter() - t1}
    return rep


def _prop2_clauses(records, floors, rep: SweepReport):
    clauses = []
    for name in PROP2_COLUMNS[1:]:
        pts = [(r.eps, getattr(r, name)) for r in records if getattr(r, name) is not None]
        excl = [e for e, val in pts if 0 < val < floors.get(e, 0.0)]
        try:
            fit = fit_loglog_rate(pts, name, excl)
        except InsufficientData as exc:
            clauses.append(Clause(f"{name} slope", False, str(exc)))
            continue
        rep.fits.append(fit)
        target = rep.targets.get(name)
        if target is None:
            continue
        ok = fit.below_floor or fit.slope >= target
        if name in R2_MIN and not fit.below_floor:
            ok = ok and fit.r2 >= R2_MIN[name]
        clauses.append(Clause(f"{name} slope", ok, f"slope {fit.slope:.4g} r2 {fit.r2:.4g} target {target:.4g}"))
    psi = [r.err_psi_l2 for r in records]
    if any(psi):
        clauses.append(Clause("err_psi_l2 strictly decreasing", strictly_decreasing(psi)))
    return clauses


# Stationary sweep ----------------------------------------------------------

def _stationary_point(args):
    cfg, eps, u0_values = args
    grid = cfg.interval_grid()
    u0 = DeflectionProfile.from_values(u0_values, grid)
    try:
        sol = solve_coupled_stationary(cfg.lam, eps, cfg.params(eps), grid, cfg.n_eta, init=u0)
    except (NoConvergence, TouchdownError) as exc:
        return eps, None, str(exc)
    u = sol.u
    h1 = sobolev_norm(GridFunction1D(u.values - u0.values, grid), 1.0)
    ee = electrostatic_energy(sol.potential, u, eps)
    lim = integrate_1d(GridFunction1D(1.0 / (1.0 + u.values), grid))
    pair = limit_potential_gap(u, u0, eps, cfg.n_eta, sol.potential)
    return eps, ErrorRecord(eps=eps, h1_err=h1, drift=abs(ee - lim), psi_pair=pair,
                            newton_iters=sol.newton_iters), None


def run_stationary_sweep(cfg: RunConfig) -> SweepReport:
    """Coupled stationary states across eps against the eps = 0 state."""
    t0 = time.perf_counter()
    grid = cfg.interval_grid()
    params = cfg.params()
    if cfg.lam > 0:
        pull = find_pullin_threshold(0.0, params, grid, tol=cfg.pullin_tol, lam_guess=cfg.lam_guess)
        if cfg.lam >= pull.lam_low:
            raise PreconditionError(f"lam = {cfg.lam} is not below the pull-in bracket [{pull.lam_low:.6g}, {pull.lam_high:.6g}]")
    ref = solve_limit_stationary(cfg.lam, params, grid, tol=cfg.newton_tol)
    eps_list = [e for e in cfg.eps if e > 0]
    if len(eps_list) != len(cfg.eps):
        raise PreconditionError("stationary sweep needs eps > 0 (eps = 0 is the reference)")
    results = _map(_stationary_point, [(cfg, e, np.array(ref.u.values)) for e in eps_list], cfg.threads)
    results.sort(key=lambda r: -r[0])
    t1 = time.perf_counter()
    rep = SweepReport("stationary", [r for _, r, _ in results if r is not None], columns=STATIONARY_COLUMNS)
    rep.failures = [{"eps": e, "error": msg} for e, r, msg in results if r is None]
    rep.targets = {"drift": 1.8, "h1_err": None, "psi_l2": None, "dzpsi_l2": None}
    recs = rep.records
    if rep.failures:
        rep.clauses.append(Clause("all coupled solves converged", False, f"{len(rep.failures)} failed"))
    if cfg.lam == 0:
        rep.clauses.append(Clause("zero branch", all(r.h1_err == 0 and r.drift == 0 for r in recs)))
    else:
        h1 = [r.h1_err for r in recs]
        rep.clauses.append(Clause("h1_err strictly decreasing", strictly_decreasing(h1)))
        if len(h1) >= 2:
            rep.clauses.append(Clause("h1_err final <= first/2", h1[-1] <= 0.5 * h1[0], f"{h1[-1]:.3g} vs {h1[0]:.3g}"))
        for name, getter in (("drift", lambda r: r.drift), ("h1_err", lambda r: r.h1_err),
                             ("psi_l2", lambda r: r.psi_pair[0]), ("dzpsi_l2", lambda r: r.psi_pair[1])):
            try:
                fit = fit_loglog_rate([(r.eps, getter(r)) for r in recs], name)
            except InsufficientData as exc:
                if rep.targets[name] is not None:
                    rep.clauses.append(Clause(f"{name} slope", False, str(exc)))
                continue
            rep.fits.append(fit)
            target = rep.targets[name]
            if target is not None:
                rep.clauses.append(Clause(f"{name} slope", fit.slope >= target,
                                          f"slope {fit.slope:.4g} target {target}"))
    rep.timings = {"sweep": t1 - t0, "fits": time.perf_counter() - t1}
    return rep


# Evolution sweep -----------------------------------------------------------

def run_evolution_sweep(cfg: RunConfig) -> SweepReport:
    """compare_evolutions on the configured data plus the common-existence check."""
    t0 = time.perf_counter()
    grid = cfg.interval_grid()
    c = cfg.u0_amplitude
    u0 = DeflectionProfile.from_function(lambda x: -c * (1 - x**2) ** 2, grid)
    u1 = np.zeros(grid.n_nodes) if cfg.gamma > 0 else None
    adm = check_admissible(u0, 2.0 + 2.0 * cfg.alpha_prime, cfg.kappa)
    if not adm:
        raise PreconditionError(f"initial deflection not admissible: failed {', '.join(adm.failed)}")
    eps_list = [e for e in cfg.eps]
    rep = SweepReport("evolve", [], columns=EVOLUTION_COLUMNS)
    rep.targets = {"sup_u_err": None, "sup_ut_err": None}
    try:
        recs = compare_evolutions(cfg.params(), eps_list, u0, u1, cfg.T, cfg.dt or None, cfg.n_eta,
                                  cfg.alpha_prime, cfg.n_snapshots, cfg.threads)
    except QuenchBeforeT as exc:
        rep.clauses.append(Clause("no quench before T", False, str(exc)))
        rep.timings = {"sweep": time.perf_counter() - t0}
        return rep
    rep.records = sorted(recs, key=lambda r: -r.eps)
    rep.clauses.append(Clause("no quench before T", True))
    positive = [r for r in rep.records if r.eps > 0]
    if cfg.lam == 0 or not positive:
        rep.clauses.append(Clause("zero errors", all(r.sup_u_err == 0 and not r.sup_ut_err for r in rep.records)))
    else:
        series = {"sup_u_err": [r.sup_u_err for r in positive],
                  "cvpsi_psi": [r.cvpsi_pair[0] for r in positive],
                  "cvpsi_dz": [r.cvpsi_pair[1] for r in positive]}
        if cfg.gamma > 0:
            series["sup_ut_err"] = [r.sup_ut_err for r in positive]
        for name, vals in series.items():
            rep.clauses.append(Clause(f"{name} strictly decreasing", strictly_decreasing(vals)))
            try:
                rep.fits.append(fit_loglog_rate(list(zip([r.eps for r in positive], vals)), name))
            except InsufficientData:
                pass
    rep.timings = {"sweep": time.perf_counter() - t0}
    return rep


# Pull-in -------------------------------------------------------------------

@dataclass(frozen=True)
class PullInRow:
    eps: float
    lambda_star: float
    bracket_width: float
    lam_low: float
    lam_high: float

    def row(self, columns):
        return [getattr(self, c) for c in columns]


def run_pullin(cfg: RunConfig) -> SweepReport:
    t0 = time.perf_counter()
    grid = cfg.interval_grid()
    params = cfg.params()
    rows = []
    rep = SweepReport("pullin", rows, columns=PULLIN_COLUMNS)
    for eps in cfg.eps:
        pr = find_pullin_threshold(eps, params.replace(eps=eps), grid, tol=cfg.pullin_tol,
                                   lam_guess=cfg.lam_guess, n_eta=cfg.n_eta)
        rows.append(PullInRow(eps, pr.lambda_star, pr.bracket_width, pr.lam_low, pr.lam_high))
        rep.clauses.append(Clause(f"bracket width eps={eps:g}", pr.bracket_width <= cfg.pullin_tol,
                                  f"{pr.bracket_width:.3g}"))
        if eps == 0 and cfg.dense_scan:
            start = max(0.0, math.floor((pr.lam_low - 0.05) * 1000) / 1000)
            ok_lam, bad_lam = dense_scan_threshold(params, grid, 1e-3, start)
            rep.extra["dense_scan"] = {"last_ok": ok_lam, "first_fail": bad_lam}
            agree = pr.lam_low - 1e-3 <= ok_lam <= pr.lam_high and pr.lam_low <= bad_lam <= pr.lam_high + 1e-3
            rep.clauses.append(Clause("dense scan agrees", agree, f"scan ({ok_lam:.4f}, {bad_lam:.4f})"))
    rep.timings = {"sweep": time.perf_counter() - t0}
    return rep


# Reports -------------------------------------------------------------------

def _fmt(val) -> str:
    if val is None:
        return ""
    if isinstance(val, (int, np.integer)) and not isinstance(val, bool):
        return str(int(val))
    return "%.17g" % float(val)


def write_csv(records, columns, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in records:
            w.writerow([_fmt(v) for v in r.row(columns)])


def read_csv(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InsufficientData(f"{path} is empty")
    header = rows[0]
    data = [{k: (float(v) if v != "" else None) for k, v in zip(header, row)} for row in rows[1:]]
    return header, data


def fit_json(fit: RateFit, target, passed) -> dict:
    return {
        "name": fit.name,
        "slope": None if math.isinf(fit.slope) else fit.slope,
        "r2": fit.r2,
        "target": target,
        "pass": passed,
        "intercept": None if math.isinf(fit.intercept) else fit.intercept,
        "below_floor": fit.below_floor,
        "excluded_eps": list(fit.excluded),
        "points": [list(p) for p in fit.points],
    }


def emit_report(records, fits, path, *, columns, cfg: RunConfig | None = None, targets=None,
                clauses=(), timings=None, runtime=None, extra=None, failures=()) -> dict:
    """Write ``path`` (CSV) and ``path`` with .json suffix (summary).

    Also writes the config echo as ``.ini`` next to the CSV so the run can
    be repeated exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(records, columns, path)
    targets = targets or {}
    clause_map = {c.name: c.passed for c in clauses}
    fit_entries = []
    for f in fits:
        target = targets.get(f.name)
        passed = clause_map.get(f"{f.name} slope") if target is not None else None
        fit_entries.append(fit_json(f, target, passed))
    summary = {
        "config": cfg.to_dict() if cfg is not None else None,
        "grid": None if cfg is None else {"nx_nodes": cfg.nx_nodes, "neta_nodes": cfg.neta_nodes},
        "records_path": str(path),
        "fits": fit_entries,
        "clauses": [{"name": c.name, "pass": c.passed, "detail": c.detail} for c in clauses],
        "all_pass": all(c.passed for c in clauses),
        "failures": list(failures),
        "runtime_seconds": runtime,
        "timings": timings or {},
        "version": _version(),
    }
    if extra:
        summary["extra"] = {str(k): v for k, v in extra.items()}
    path.with_suffix(".json").write_text(json.dumps(summary, indent=2, sort_keys=False, default=_json_default) + "\n")
    if cfg is not None:
        path.with_suffix(".ini").write_text(config_to_text(cfg))
    return summary


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): v for k, v in obj.items()}
    raise TypeError(f"not serializable: {type(obj)}")


def emit_sweep(rep: SweepReport, cfg: RunConfig, out_dir, runtime: float) -> dict:
    extra = dict(rep.extra)
    if "floors" in extra:
        extra["floors"] = {repr(k): v for k, v in extra["floors"].items()}
    return emit_report(rep.records, rep.fits, Path(out_dir) / f"{rep.experiment}.csv", columns=rep.columns,
                       cfg=cfg, targets=rep.targets, clauses=rep.clauses, timings=rep.timings,
                       runtime=runtime, extra=extra, failures=rep.failures)


def refit_csv(path, nu: float = 0.3, exclude=()) -> list[tuple[RateFit, float | None, bool | None]]:
    """Re-derive fits and verdicts from a report CSV.

    The experiment is recognized from the header; thresholds are the ones
    documented in the README.
    """
    header, rows = read_csv(path)
    if tuple(header) == PROP2_COLUMNS:
        targets = prop2_targets(nu)
    elif tuple(header) == STATIONARY_COLUMNS:
        targets = {"drift": 1.8, "h1_err": None, "psi_l2": None, "dzpsi_l2": None}
    elif tuple(header) == EVOLUTION_COLUMNS:
        targets = {name: None for name in header[1:]}
    else:
        raise InsufficientData(f"unrecognized CSV header {header}")
    out = []
    for name, target in targets.items():
        pts = [(r["eps"], r[name]) for r in rows if r.get(name) is not None and r["eps"] > 0]
        try:
            fit = fit_loglog_rate(pts, name, exclude)
        except InsufficientData:
            continue
        verdict = None
        if target is not None:
            verdict = fit.below_floor or fit.slope >= target
            if name in R2_MIN and not fit.below_floor:
                verdict = verdict and fit.r2 >= R2_MIN[name]
        out.append((fit, target, verdict))
    return out


__all__ = [
    "InsufficientData",
    "SweepReport",
    "Clause",
    "fit_loglog_rate",
    "run_prop2_sweep",
    "prop2_report",
    "run_stationary_sweep",
    "run_evolution_sweep",
    "run_pullin",
    "emit_report",
    "emit_sweep",
    "refit_csv",
    "read_csv",
    "discretization_floor",
    "random_profiles",
    "sigma_key",
]
