"""Command line: ``listflow {run,check,converge,rescale}``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import driver
from .config import OUTPUT_ENV, ConfigError, load_config
from .singularity import DEFAULT_C


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="listflow", description="Rotationally symmetric List flow simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("run", help="evolve a configuration and write CSV output")
    p.add_argument("config")
    p = sub.add_parser("check", help="initial constants and decay report, no evolution")
    p.add_argument("config")
    p = sub.add_parser("converge", help="Richardson study over doubling resolutions")
    p.add_argument("config")
    p.add_argument("--levels", type=int, nargs="+", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p = sub.add_parser("rescale", help="blow-up sequence and rescaled profiles of a run")
    p.add_argument("run_dir")
    p.add_argument("--C", type=float, default=DEFAULT_C)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.cmd == "rescale":
        if not args.C >= 1:
            print(f"error: C must be >= 1, got {args.C}", file=sys.stderr)
            return driver.EXIT_CONFIG
        try:
            print(driver.rescale_run(Path(args.run_dir), args.C), end="")
        except FileNotFoundError as e:
            print(f"error: {e}", file=sys.stderr)
            return driver.EXIT_CONFIG
        return 0
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return driver.EXIT_CONFIG
    try:
        if args.cmd == "check":
            rep = driver.check(cfg)
            print(rep.text())
            return 0 if rep.ok else 1
        if args.cmd == "converge":
            rep = driver.converge(cfg, args.levels, jobs=args.jobs)
            print(rep.text())
            return 0 if rep.ok else 1
        res = driver.run(cfg)
    except ValueError as e:
        # bad initial data or levels: nothing has been written
        print(f"error: {e}", file=sys.stderr)
        return driver.EXIT_CONFIG
    print(f"{res.reason}: t = {res.final.t:.6g} after {res.steps} steps ({res.wall_seconds:.2f} s); "
          f"output in {res.output_dir} (override with ${OUTPUT_ENV})")
    viol = sorted({v for _, v in res.violations})
    if viol:
        print("monitor violations: " + ", ".join(viol))
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
