"""The main entry point when transformed_euler is used on the command line."""

import argparse
import logging
import sys
from fractions import Fraction

from . import cli
from .solver import SolverError
from .solver.config import METHOD_CHOICES
from .solver.examples import EXAMPLES


def kappa_value(text: str) -> float:
    """Accept kappa as a decimal or a fraction such as 1/16."""
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"invalid kappa {text!r}") from None


def level_range(text: str) -> tuple[int, int]:
    """Parse K_MIN:K_MAX."""
    try:
        k_min, k_max = (int(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"levels must look like K_MIN:K_MAX, not {text!r}"
        ) from None
    return k_min, k_max


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-e",
        "--example",
        action="store",
        choices=list(EXAMPLES),
        help="use the built-in problem EXAMPLE",
    )
    common.add_argument(
        "-c",
        "--config",
        action="store",
        help="configure the run and/or the problem with a provided TOML file CONFIG",
    )
    common.add_argument(
        "-m",
        "--method",
        action="store",
        choices=METHOD_CHOICES,
        help="crude Euler-Maruyama (em), the transformed scheme (emt) or both",
    )
    common.add_argument(
        "-k",
        "--kappa",
        action="append",
        type=kappa_value,
        help="transform parameter in (0,1), e.g. 1/16; repeat for several values",
    )
    common.add_argument("--paths", action="store", type=int, help="number of paths")
    common.add_argument(
        "--levels",
        action="store",
        type=level_range,
        help="compare levels K_MIN to K_MAX, the step size on level k being T 2^-k",
    )
    common.add_argument("--seed", action="store", type=int, help="master seed")
    common.add_argument("--x0", action="store", type=float, help="initial value")
    common.add_argument("--T", action="store", type=float, help="time horizon")
    common.add_argument(
        "--c-bar",
        action="store",
        type=float,
        dest="c_bar",
        help="ellipticity bound for sigma² at the drift's breakpoints",
    )
    common.add_argument("-o", "--out", action="store", help="output directory")
    common.add_argument(
        "-w", "--workers", action="store", type=int, help="number of worker threads"
    )
    common.add_argument(
        "--chunk-size",
        action="store",
        type=int,
        dest="chunk_size",
        help="paths simulated together per job",
    )
    common.add_argument(
        "--user-config",
        action="store",
        dest="user_config",
        help="read user defaults from USER_CONFIG instead of the usual location",
    )
    common.add_argument(
        "--save-options",
        action="store_true",
        dest="save_options",
        help="also store the run options given on the command line as user defaults",
    )

    parser = argparse.ArgumentParser(
        prog="transformed_euler",
        description="Euler-Maruyama for SDEs with discontinuous drift, with and without transformation",
        epilog="options passed on the command line override the config files",
    )
    subparsers = parser.add_subparsers(title="commands", dest="command", required=True)

    transform_parser = subparsers.add_parser(
        "transform",
        parents=[common],
        help="dump the transform and the transformed coefficients to CSV",
    )
    transform_parser.add_argument(
        "--samples", action="store", type=int, help="number of grid points"
    )
    subparsers.add_parser(
        "convergence",
        parents=[common],
        help="estimate L2 errors between consecutive levels and fit the order",
    )
    simulate_parser = subparsers.add_parser(
        "simulate",
        parents=[common],
        help="write the terminal value of every path at a single level",
    )
    simulate_parser.add_argument(
        "--level", action="store", type=int, help="simulate with step size T 2^-LEVEL"
    )
    return parser


def main(argv=None):
    """Run transformed_euler as a CLI program."""

    # Logs should be printed directly to stdout
    logging.basicConfig(
        stream=sys.stdout,
        format="%(asctime)s %(message)s",
        encoding="utf-8",
        level=logging.INFO,
    )

    parser = build_parser()
    args = parser.parse_args(argv)

    overrides = {
        "method": args.method,
        "kappa": args.kappa,
        "paths": args.paths,
        "seed": args.seed,
        "x0": args.x0,
        "T": args.T,
        "c_bar": args.c_bar,
        "out": args.out,
        "workers": args.workers,
        "chunk_size": args.chunk_size,
        "samples": getattr(args, "samples", None),
        "level": getattr(args, "level", None),
    }
    if args.levels is not None:
        overrides["k_min"], overrides["k_max"] = args.levels

    try:
        run_config, problem = cli.setup_run(
            config_file=args.config,
            example=args.example,
            user_config_file=args.user_config,
            save_options=args.save_options,
            **overrides,
        )
        if args.command == "transform":
            written = cli.cmd_transform(run_config, problem)
        elif args.command == "convergence":
            written = cli.cmd_convergence(
                run_config, problem, cli.TerminalProgress("Paths")
            )
        elif args.command == "simulate":
            written = cli.cmd_simulate(run_config, problem, cli.TerminalProgress("Paths"))
    except (SolverError, OSError) as error:
        logging.error(f"{args.command} failed")
        print(f"error: {type(error).__name__}: {error}", file=sys.stderr)
        sys.exit(2)

    for path in written:
        print(path)
    logging.info("Task complete")


if __name__ == "__main__":
    main()
