"""Command-line driver.

    python3 -m mems_limit [global flags] {prop2,stationary,evolve,pullin,fit}

Exit codes: 0 every acceptance clause passed, 2 numerical failure,
3 configuration error, 4 a clause failed (the report is still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from .beam import TouchdownError
from .config import EXPERIMENTS, RunConfig, default_config, parse_config
from .grids import ConfigurationError
from .harness import (
    InsufficientData,
    emit_sweep,
    fit_json,
    prop2_report,
    refit_csv,
    run_evolution_sweep,
    run_pullin,
    run_stationary_sweep,
)
from .poisson import PreconditionError, SolverFailure
from .stationary import NoConvergence

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG, EXIT_CLAUSE = 0, 2, 3, 4

RUNNERS = {
    "prop2": prop2_report,
    "stationary": run_stationary_sweep,
    "evolve": run_evolution_sweep,
    "pullin": run_pullin,
}

DEFAULTS_HELP = """\
config keys (INI sections in brackets) and defaults:
  [run]    experiment, out_dir=out, threads=1
  [grid]   nx_nodes, neta_nodes      (prop2/stationary 257x129, evolve 65x33, pullin 129x33)
  [model]  beta=1 tau=0 a=0 gamma=0 lam (stationary 0.05, evolve 0.2, else 0)
  [sweep]  eps (prop2 0.2..0.0125 halving, stationary/evolve 0.1 0.05 0.025, pullin 0)
           profile_amplitude=0.3 kappa=0.1 nu=0.3 sigmas=0,0.25 floor_factor=10
  [evolve] alpha_prime=0.1 T=1 dt=0 (auto: min(h, 0.01)) n_snapshots=11
           u0_amplitude=0.1 kappa_stop=0.01
  [solver] newton_tol=1e-10 pullin_tol=1e-3 lam_guess=10 dense_scan=true
unknown keys are an error; see docs/config.md
"""


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mems_limit",
        description="Small aspect ratio limit experiments for the MEMS beam model.",
        epilog=DEFAULTS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--config", type=Path, help="INI config file (defaults apply to absent keys)")
    p.add_argument("--out", type=Path, help="output directory (overrides out_dir)")
    p.add_argument("--threads", type=int, help="worker processes for sweep points")
    p.add_argument("--seed", type=int, default=None, help="reserved; all algorithms are deterministic")
    p.add_argument("--verbose", "-v", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(name, help=f"run the {name} experiment")
    fit = sub.add_parser("fit", help="re-fit rates offline from a report CSV")
    fit.add_argument("csv", type=Path)
    fit.add_argument("--nu", type=float, default=0.3)
    fit.add_argument("--exclude", type=float, nargs="*", default=(), help="eps values to leave out")
    return p


def _load_config(args) -> RunConfig:
    if args.config is not None:
        cfg = parse_config(args.config)
        if cfg.experiment != args.command:
            cfg = replace(cfg, experiment=args.command)
    else:
        cfg = default_config(args.command)
    if args.out is not None:
        cfg = replace(cfg, out_dir=str(args.out))
    if args.threads is not None:
        cfg = replace(cfg, threads=args.threads)
    return cfg


def _run_fit(args) -> int:
    try:
        fits = refit_csv(args.csv, args.nu, args.exclude)
    except (OSError, InsufficientData, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    entries = [fit_json(f, t, v) for f, t, v in fits]
    print(json.dumps(entries, indent=2))
    return EXIT_CLAUSE if any(e["pass"] is False for e in entries) else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "fit":
        return _run_fit(args)
    t0 = time.perf_counter()
    try:
        cfg = _load_config(args)
        rep = RUNNERS[args.command](cfg)
    except (ConfigurationError, PreconditionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverFailure, NoConvergence, TouchdownError, InsufficientData, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    summary = emit_sweep(rep, cfg, cfg.out_dir, time.perf_counter() - t0)
    for c in summary["clauses"]:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['name']} {c['detail']}".rstrip())
    print(f"report: {summary['records_path']}")
    if rep.failures:
        return EXIT_NUMERICAL
    return EXIT_OK if rep.passed else EXIT_CLAUSE


if __name__ == "__main__":
    sys.exit(main())
