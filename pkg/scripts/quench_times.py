"""Quench time of the eps = 0 parabolic problem against lambda.

For large lambda the flat start reaches touchdown in time ~ 1/(3 lambda);
the script prints the measured time next to that estimate.
"""

from __future__ import annotations

import argparse

import numpy as np

from mems_limit.beam import DeflectionProfile, ModelParams
from mems_limit.evolution import run_evolution
from mems_limit.grids import IntervalGrid


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--lams", type=float, nargs="*", default=[10.0, 25.0, 50.0, 100.0])
    p.add_argument("--cells", type=int, default=128)
    p.add_argument("--T", type=float, default=1.0)
    args = p.parse_args(argv)
    grid = IntervalGrid(args.cells)
    u0 = DeflectionProfile.from_values(np.zeros(grid.n_nodes), grid)
    print(f"{'lam':>8} {'t_quench':>12} {'1/(3 lam)':>12}")
    for lam in args.lams:
        rec = run_evolution(ModelParams(lam=lam), u0, T=args.T, n_snapshots=2)
        tq = float("nan") if rec.quench is None else rec.quench[0]
        print(f"{lam:8.3g} {tq:12.5g} {1 / (3 * lam):12.5g}")


if __name__ == "__main__":
    main()
