import argparse
import asyncio
import logging
import sys

from mobw.base import MOBWError
from mobw.commands import CommandFailure, default_commands
from mobw.config import Command, load_run_config
from mobw.samplers import AlphaMethod

logger = logging.getLogger(__name__)

COMMANDS = default_commands()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mobw",
        description="Bayesian inference for dependent competing risks under the Marshall-Olkin bivariate Weibull model",
        epilog="commands:\n" + COMMANDS.describe(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=[c.value for c in Command])
    parser.add_argument("--config", help="key=value file; command-line flags override it")

    data = parser.add_argument_group("data")
    data.add_argument("--data", help="CSV with header time,cause")
    data.add_argument("--divisor", type=float, help="divide times by this (365 turns days into years)")
    data.add_argument("--scheme", help="censoring scheme, e.g. complete, type2:r=30, hybrid1:r=30:tau=2")
    data.add_argument("--units", type=int, help="units on test when the file holds only observed failures")

    sampling = parser.add_argument_group("sampling")
    sampling.add_argument("--draws", type=int, help="posterior draws M")
    sampling.add_argument("--levels", help="credible levels, e.g. 0.90,0.95,0.99")
    sampling.add_argument("--ages", help="report E(T | T > a) for these ages, e.g. 1,2")
    sampling.add_argument("--restricted", action="store_true", default=None, help="impose lambda1 <= lambda2")
    sampling.add_argument("--seed", type=int)
    sampling.add_argument("--method", choices=[m.value for m in AlphaMethod])
    sampling.add_argument("--pooled", action="store_true", default=None, help="also fit the single Weibull of H0")
    sampling.add_argument("--bf-mode", choices=["closed", "numeric"])
    sampling.add_argument("--ks-method", choices=["asymptotic", "exact"])

    prior = parser.add_argument_group("prior hyperparameters")
    for name in ("a", "b", "a0", "a1", "a2", "c1", "c2", "d1", "d2", "d3", "d4"):
        prior.add_argument(f"--{name}", type=float)

    study = parser.add_argument_group("simulation")
    study.add_argument("--sets", help="parameter sets, e.g. I,II,III")
    study.add_argument("--sizes", help="sample sizes, e.g. 30,40,50")
    study.add_argument("--replications", type=int)
    study.add_argument("--study-draws", type=int, help="posterior draws per replication")
    study.add_argument("--workers", type=int)
    study.add_argument("--timeout", type=float, help="seconds allowed for each study cell")

    parser.add_argument("--out", help="output directory")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--log-file")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        filename=args.log_file,
        level=args.log_level,
        format='%(asctime)s - %(levelname)s - %(message)s'
    )
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "config", "log_level", "log_file")
    }
    try:
        cfg = load_run_config(args.command, args.config, overrides)
    except MOBWError as e:
        print(f"error: {e.message}", file=sys.stderr)
        return 1

    result = asyncio.run(COMMANDS.run(name=cfg.command, cfg=cfg))
    if isinstance(result, CommandFailure) or result.error:
        print(f"error: {result.error}", file=sys.stderr)
        return 1
    if result.output:
        print(result.output)
    for path in result.files:
        logger.info(f"output: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
