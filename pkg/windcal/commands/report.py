"""`report` command."""

import argparse

from windcal.services.report_service import build_report


def run(args: argparse.Namespace) -> int:
    for name, path in build_report(args.results_dir, args.out_dir).items():
        print(f"{name}: {path}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("report", help="Plot-data CSVs from a campaign results directory")
    parser.add_argument("results_dir", help="Campaign output directory")
    parser.add_argument("--out-dir", default=None, help="Destination (default: RESULTS_DIR/report)")
    parser.set_defaults(func=run)
