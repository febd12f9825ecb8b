#!/usr/bin/env python3
"""
Run the flexible manipulator pipeline.

Subcommands:
1. modes     - natural frequencies and mode shapes, compared with the table
2. synth     - functional observer synthesis and its verification report
3. simulate  - closed-loop regulation or tracking run
4. verify    - recheck observer matrices supplied in a YAML file
5. sweep     - one simulation per value of a config parameter
"""

import argparse
import logging
import sys
import time
from typing import List, Optional

from manipulator.cli_io import (
    EXIT_CONFIG,
    SUBCOMMANDS,
    CommandOptions,
    load_config,
    run_subcommand,
)
from manipulator.errors import ConfigError
from utils.common import parse_number_list
from utils.logger import get_logger

logger = logging.getLogger(__name__)


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command-line arguments."""
    parser = argparse.ArgumentParser(description="Run the flexible manipulator pipeline")
    parser.add_argument("--config", type=str, default=None, help="Path to YAML config (default: bundled defaults)")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")

    subparsers = parser.add_subparsers(dest="command", required=True)

    modes = subparsers.add_parser("modes", help="Compute modes and compare with the table")
    modes.add_argument("--state-space", action="store_true", help="Also write A, B, C")

    synth = subparsers.add_parser("synth", help="Synthesize the functional observer")
    synth.add_argument("--report", type=str, help="Path of the residual report")

    simulate = subparsers.add_parser("simulate", help="Run a closed-loop simulation")
    simulate.add_argument("--scenario", choices=["regulation", "tracking"], help="Override simulation.scenario")
    simulate.add_argument("--mode", choices=["full_state", "observer_fed"], help="Override simulation.mode")

    verify = subparsers.add_parser("verify", help="Verify observer matrices from a file")
    verify.add_argument("--matrices", type=str, required=True, help="YAML file of N, L, H, G, D_obs, T (and F)")
    verify.add_argument("--report", type=str, help="Path of the residual report")

    sweep = subparsers.add_parser("sweep", help="Simulate over a list of parameter values")
    sweep.add_argument("--param", type=str, required=True, help="Dotted config key, e.g. controller.k1")
    sweep.add_argument("--values", type=parse_number_list, required=True, help="Comma separated values")
    sweep.add_argument("--workers", type=int, default=4, help="Number of parallel simulations (default: 4)")

    return parser.parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    """Main function."""
    args = parse_args(argv)

    try:
        config = load_config(args.config)
    except ConfigError as e:
        get_logger("")
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG

    logging_section = config.logging.model_dump()
    if args.debug:
        logging_section["level"] = "DEBUG"
    get_logger("", logging_section)

    options = CommandOptions(
        state_space=getattr(args, "state_space", False),
        report=getattr(args, "report", None),
        scenario=getattr(args, "scenario", None),
        mode=getattr(args, "mode", None),
        matrices=getattr(args, "matrices", None),
        param=getattr(args, "param", None),
        values=getattr(args, "values", None) or [],
        workers=getattr(args, "workers", 4),
    )

    start_time = time.time()
    logger.info(f"Starting {args.command}")
    code = run_subcommand(args.command, config, options)
    elapsed_time = time.time() - start_time
    logger.info(f"{args.command} completed in {elapsed_time:.2f} seconds (exit code {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
