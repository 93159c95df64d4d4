"""Run every experiment config in scripts/configs and summarize exit codes.

    python3 scripts/run_all.py [--threads N] [--only NAME ...]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from mems_limit.cli import main as cli_main

HERE = Path(__file__).resolve().parent


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--only", nargs="*", default=None, help="config stems to run")
    args = p.parse_args(argv)
    codes = {}
    for ini in sorted((HERE / "configs").glob("*.ini")):
        if args.only and ini.stem not in args.only:
            continue
        command = ini.stem.split("_")[0]
        print(f"== {ini.stem}")
        t0 = time.perf_counter()
        codes[ini.stem] = cli_main(["--config", str(ini), "--threads", str(args.threads), command])
        print(f"   exit {codes[ini.stem]} in {time.perf_counter() - t0:.1f}s")
    bad = {k: v for k, v in codes.items() if v != 0}
    print("all passed" if not bad else f"nonzero exits: {bad}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
