"""
Command line entry point: cvqkdadapt <command> --config <path> [--out <dir>] [--seed <u64>]
"""

from __future__ import annotations

import argparse
import logging
import sys

from cvqkdadapt.adapt_core import InfeasibleTargetError
from cvqkdadapt.config import ConfigError, ConfigInvalid, load_config, validate_config
from cvqkdadapt.pipelines import FIGURE_PIPELINES, run_experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_INVALID = 2
EXIT_INFEASIBLE = 3
EXIT_CROSSCHECK_FAILED = 4

# subcommand -> the pipelines it runs
COMMANDS = {
    "adapt": ["adapt"],
    "multiuser": ["multiuser"],
    "equalize": ["equalize"],
    "montecarlo": ["montecarlo"],
    "figures": FIGURE_PIPELINES,
}


def _parse_args(argv):
    parser = argparse.ArgumentParser(prog="cvqkdadapt",
                                     description="Iterative secret key rate adaption for multicarrier CVQKD")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging.")
    sub = parser.add_subparsers(dest="command", required=True)

    validate = sub.add_parser("validate", help="Check a config file and list every violation.")
    validate.add_argument("--config", required=True, help="Path to the JSON config file.")

    for command in COMMANDS:
        p = sub.add_parser(command, help="Run the %s pipeline(s)." % command)
        p.add_argument("--config", required=True, help="Path to the JSON config file.")
        p.add_argument("--out", default=None, help="Output directory (overrides the config).")
        p.add_argument("--seed", type=int, default=None, help="Seed, an unsigned 64-bit integer (overrides the config).")
        if command == "figures":
            p.add_argument("--pipeline", action="append", choices=FIGURE_PIPELINES, default=None,
                           help="Run only this figure pipeline (repeatable).")
    return parser.parse_args(argv)


def run(args):
    if args.command == "validate":
        try:
            report = validate_config(args.config)
        except ConfigError as e:
            logger.error("%s", e)
            return EXIT_CONFIG_INVALID
        print(report)
        return EXIT_OK if report.ok else EXIT_CONFIG_INVALID

    try:
        config = load_config(args.config, args.seed, args.out)
    except (ConfigError, ConfigInvalid) as e:
        logger.error("%s", e)
        return EXIT_CONFIG_INVALID

    pipelines = COMMANDS[args.command]
    if args.command == "figures" and args.pipeline:
        pipelines = args.pipeline
    try:
        results = run_experiment(config, pipelines)
    except InfeasibleTargetError as e:
        logger.error("%s", e)
        return EXIT_INFEASIBLE
    except ValueError as e:
        # e.g. too few Monte Carlo trials for a cross-check
        logger.error("%s", e)
        return EXIT_CONFIG_INVALID

    if "montecarlo" in results and not results["montecarlo"]["crosscheck"]["PASS"].all():
        logger.error("monte carlo cross-check failed, see %s", config.output_dir)
        return EXIT_CROSSCHECK_FAILED
    logger.info("outputs written to %s", config.output_dir)
    return EXIT_OK


def main(argv=None):
    args = _parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.debug else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
