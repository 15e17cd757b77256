#!/usr/bin/env python3
"""
markovnet command line
Learn dependency networks, convert them to Markov networks, learn weights and evaluate
"""
import argparse
import logging
import sys

from commands import dn2mn, dnlearn, enumerate_joint, evaluate, mnlearnw, sample
from config import setup_logging
from models.errors import MarkovNetError
from settings import ExperimentSettings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Register commands
COMMANDS = (dnlearn, dn2mn, mnlearnw, evaluate, enumerate_joint, sample)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='markovnet', description='Dependency network to Markov network toolkit')
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def cli_dispatch(argv=None) -> int:
    """Parse argv, run one subcommand and return its exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 after --help
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    setup_logging(args.log_level)

    errors = args.validate(args)
    if errors:
        for error in errors:
            logger.error(f"{args.command}: {error}")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    try:
        settings = ExperimentSettings(args.config)
        args.run(args, settings)
        return EXIT_OK
    except (MarkovNetError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE
    except Exception as e:
        logger.exception(f"Unexpected error in {args.command}: {e}")
        return EXIT_FAILURE


def main():
    return cli_dispatch(sys.argv[1:])


if __name__ == '__main__':
    sys.exit(main())
