"""Command line driver.

Exit codes: 0 success/PASS, 1 error, 2 verdict FAIL, 3 assumptions refused.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .experiments import ExperimentConfig, ExperimentError, emit, run
from .io import OutputError

log = logging.getLogger("polarlab")

VERBS = {
    "polarize": ("polarization-limit", "random-points"),
    "energy": ("energy-asymptote",),
    "greedy": ("greedy",),
    "equilibrium": ("equilibrium",),
    "verify": ("theorem-abc",),
    "counterexample": ("counterexample-ball",),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="polarlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, kinds in VERBS.items():
        p = sub.add_parser(verb, help=f"experiment kind: {' or '.join(kinds)}")
        p.add_argument("--config", required=True, type=Path, help="experiment JSON file")
        p.add_argument("--out", type=Path, help="output directory (default: config 'output')")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--mesh-resolution", type=float, help="coarse mesh resolution override")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = ExperimentConfig.from_file(args.config)
        kinds = VERBS[args.verb]
        if cfg.experiment not in kinds:
            raise ExperimentError(
                f"verb {args.verb!r} runs {', '.join(kinds)}; config asks for {cfg.experiment!r}"
            )
        if args.seed is not None:
            cfg.seed = args.seed
        if args.mesh_resolution is not None:
            if not args.mesh_resolution > 0:
                raise ExperimentError("--mesh-resolution must be positive")
            cfg.options["mesh_resolution"] = args.mesh_resolution
        out = args.out or (Path(cfg.output) if cfg.output else None)
        if out is None:
            raise ExperimentError("no output directory: pass --out or set 'output' in the config")
        if not out.is_dir():
            raise OutputError(f"output directory {out} does not exist")
        start = time.perf_counter()
        result = run(cfg)
        elapsed = time.perf_counter() - start
        emit(result, out, cfg, wall_time=round(elapsed, 3))
    except (ExperimentError, OutputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{cfg.experiment}: {result.verdict}")
    for key, val in result.summary.items():
        log.info("  %s: %s", key, val)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
