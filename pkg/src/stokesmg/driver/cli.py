"""Command-line entry point."""

import argparse
import logging
import sys
from pathlib import Path

from ..errors import ConfigurationError
from .config import (PRESETS, ExperimentKind, build_config, load_config,
                     parse_floats, parse_levels)
from .experiments import run
from .report import render


def make_parser():
    p = argparse.ArgumentParser(
        prog="stokesmg",
        description="Multigrid-preconditioned Stokes control experiments.")
    p.add_argument("--experiment", choices=[k.value for k in ExperimentKind])
    p.add_argument("--config", help="YAML/JSON config file or preset name "
                   f"({', '.join(sorted(PRESETS))})")
    p.add_argument("--level", type=int, help="single finest level (h = 2^-level)")
    p.add_argument("--levels", type=parse_levels,
                   help="levels as '2,3,4' or '2..5'")
    p.add_argument("--num-levels", type=parse_levels,
                   help="grid counts of the preconditioner, e.g. '1,2,3,4'")
    p.add_argument("--beta", type=parse_floats, help="comma-separated betas")
    p.add_argument("--gamma-u", type=float)
    p.add_argument("--gamma-p", type=float)
    p.add_argument("--strategy", choices=["zero-mean", "pinned"])
    p.add_argument("--control-space", choices=["full", "interior"])
    p.add_argument("--outliers", type=int,
                   help="eigenvalues excluded from the filtered distance")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--max-iter-unpreconditioned", type=int)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--seed", type=int)
    p.add_argument("--heavy", action="store_true", default=None,
                   help="allow h = 2^-7 and finer")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        base = load_config(args.config) if args.config else {}
        levels = args.levels
        if args.level is not None:
            levels = [args.level]
        config = build_config(
            base, experiment=args.experiment, levels=levels,
            num_levels=args.num_levels, beta=args.beta, gamma_u=args.gamma_u,
            gamma_p=args.gamma_p, strategy=args.strategy,
            control_space=args.control_space, outliers=args.outliers,
            tol=args.tol, max_iter=args.max_iter,
            max_iter_unpreconditioned=args.max_iter_unpreconditioned,
            out=args.out, format=args.format, seed=args.seed,
            heavy=args.heavy)
    except ConfigurationError as exc:
        print(f"stokesmg: configuration error: {exc}", file=sys.stderr)
        return 2
    result = run(config)
    text = render(result, config)
    if config.out:
        Path(config.out).write_text(text)
    else:
        sys.stdout.write(text)
    for failure in result.failures:
        print(f"stokesmg: failed: {failure}", file=sys.stderr)
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
