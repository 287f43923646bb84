"""Command-line subcommands."""

from windcal.commands import campaign, fit, match, report, simulate

COMMANDS = (simulate, fit, match, campaign, report)
