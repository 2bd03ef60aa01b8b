"""Command-line entry point.

Exit status: 0 on success, 2 for configuration or usage errors, 3 when the
solver fails.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .driver import (gradient_ratio, run_convergence_study, run_nocodazole_experiment,
                     run_oracle_comparison, run_simulation)
from .timestepping import SimulationError

EXIT_CONFIG = 2
EXIT_SOLVER = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="configuration file (an empty file gives the reference run)")
    common.add_argument("--output-dir", help="output directory (default: [output] directory)")
    common.add_argument("--no-advection", action="store_true", help="disable microtubule transport")
    common.add_argument("--quiet", action="store_true", help="only report warnings and errors")

    p = argparse.ArgumentParser(prog="ranimport", description="DG simulation of Ran-driven nuclear import")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run one simulation")
    sub.add_parser("nocodazole", parents=[common], help="compare runs with and without advection")
    conv = sub.add_parser("converge", parents=[common], help="manufactured-solution convergence study")
    conv.add_argument("--levels", type=int, default=None)
    orc = sub.add_parser("oracle", parents=[common], help="compare with the two-compartment ODE")
    orc.add_argument("--scale", type=float, default=None, help="diffusivity multiplier")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.no_advection:
            cfg = cfg.with_model(advection=False)
        out = args.output_dir or cfg.output.directory
        say = (lambda *a: None) if args.quiet else print
        if args.command == "simulate":
            res = run_simulation(cfg, out)
            say(f"wrote {len(res.files)} file(s) to {out}; "
                f"nuclear/cytoplasmic RanGTP ratio {gradient_ratio(res.series):.4g}")
        elif args.command == "nocodazole":
            rep = run_nocodazole_experiment(cfg, out)
            say(rep.format(), end="")
        elif args.command == "converge":
            if args.levels is not None and args.levels < 3:
                raise ConfigError("--levels must be at least 3")
            for table in run_convergence_study(cfg, args.levels, out):
                say(table.format())
        else:
            res = run_oracle_comparison(cfg, args.scale, out)
            say(f"scale {res.scale:g}: max relative deviation at t_end {res.final_deviation:.4e}, "
                f"over all outputs {res.max_deviation:.4e}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, FloatingPointError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return 0


if __name__ == "__main__":
    sys.exit(main())
