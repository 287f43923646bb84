"""`campaign` command."""

import argparse

from windcal.services.campaign_service import load_campaign_spec, run_campaign


def run(args: argparse.Namespace) -> int:
    spec = load_campaign_spec(args.spec)
    summary = run_campaign(spec, threads=args.threads)
    print(f"{len(summary)} fits, {int((summary['status'] == 'ok').sum())} ok -> {spec.output_dir}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("campaign", help="Fit every (platform, week) of a CampaignSpec")
    parser.add_argument("spec", help="CampaignSpec JSON file")
    parser.add_argument("--threads", type=int, default=None, help="Worker processes")
    parser.set_defaults(func=run)
