"""Command-line entry point."""

import argparse
import logging
import logging.config
import sys
from typing import Optional, Sequence

from windcal import __version__
from windcal.commands import COMMANDS
from windcal.config import get_settings
from windcal.errors import WindcalError

logger = logging.getLogger(__name__)


def configure_logging(level: Optional[str] = None, fmt: Optional[str] = None) -> None:
    """Install stderr logging in text or JSON format."""
    settings = get_settings()
    level = (level or settings.log_level).upper()
    fmt = fmt or settings.log_format
    logging_config = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "default": {
                "format": "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
                "datefmt": "%Y-%m-%d %H:%M:%S",
            },
            "json": {
                "()": "pythonjsonlogger.jsonlogger.JsonFormatter",
                "format": "%(asctime)s %(levelname)s %(name)s %(message)s",
            },
        },
        "handlers": {
            "default": {
                "formatter": "json" if fmt == "json" else "default",
                "class": "logging.StreamHandler",
                "stream": "ext://sys.stderr",
            },
        },
        "loggers": {
            "": {"handlers": ["default"], "level": level, "propagate": True},
        },
    }
    logging.config.dictConfig(logging_config)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="windcal", description="Wind-speed sensor bias estimation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Override WINDCAL_LOG_LEVEL")
    parser.add_argument("--log-format", choices=["text", "json"], default=None, help="Override WINDCAL_LOG_FORMAT")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; returns the process exit code.

    Structural errors exit 1 with the message on stderr; unexpected
    exceptions are logged with a traceback and exit 2.
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, args.log_format)
    try:
        return args.func(args)
    except WindcalError as e:
        logger.error(f"{e.code}: {e.message}")
        print(f"error: {e.message}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.error(f"Unexpected error in '{args.command}': {e}", exc_info=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
