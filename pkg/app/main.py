"""Command-line entry point: ``python -m app.main <command> ...``."""
from argparse import ArgumentParser
from typing import List, Optional
import logging
import sys

from app.commands import clean, compare, evaluate, predict, validate_taxonomy, vocab
from app.config import settings
from app.exceptions import TaxcodeError


logger = logging.getLogger(__name__)

COMMANDS = (validate_taxonomy, vocab, clean, predict, evaluate, compare)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="taxcode",
        description="Map product and service descriptions to HSN/SAC tax codes",
    )
    parser.add_argument(
        "--log-level",
        type=str.upper,
        choices=LOG_LEVELS,
        default=settings.log_level.upper(),
        help=f"logging threshold for standard error (default {settings.log_level.upper()})",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command", required=True)
    for command in COMMANDS:
        command.add_parser(subparsers)
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True,
    )


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    try:
        return args.handler(args)
    except TaxcodeError as exc:
        logger.error(f"{args.command} failed: {type(exc).__name__}: {exc}")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:
        logger.error(f"Unhandled exception: {exc}", exc_info=True)
        print(f"error: internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
