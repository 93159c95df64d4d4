"""Pull-in threshold lambda*(eps) for a few eps, showing the approach to eps = 0."""

from __future__ import annotations

import argparse

from mems_limit.beam import ModelParams
from mems_limit.grids import IntervalGrid
from mems_limit.stationary import find_pullin_threshold


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--eps", type=float, nargs="*", default=[0.0, 0.2, 0.1, 0.05])
    p.add_argument("--cells", type=int, default=128)
    p.add_argument("--n-eta", type=int, default=32)
    p.add_argument("--tol", type=float, default=1e-3)
    args = p.parse_args(argv)
    grid = IntervalGrid(args.cells)
    base = None
    print(f"{'eps':>8} {'lambda*':>10} {'width':>10} {'shift':>10}")
    for eps in args.eps:
        pr = find_pullin_threshold(eps, ModelParams(eps=eps), grid, tol=args.tol, n_eta=args.n_eta)
        base = pr.lambda_star if base is None else base
        print(f"{eps:8.3g} {pr.lambda_star:10.5f} {pr.bracket_width:10.2g} {pr.lambda_star - base:10.2g}")


if __name__ == "__main__":
    main()
