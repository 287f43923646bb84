"""`simulate` command: synthetic interchange CSV plus its truth document."""

import argparse
import logging
from pathlib import Path

from windcal.services.data_model import write_observations
from windcal.services.result_store import atomic_write_json
from windcal.services.simulate import load_sim_config, simulate

logger = logging.getLogger(__name__)


def truth_path(out: Path) -> Path:
    """``data.csv`` -> ``data.csv.truth.json``."""
    return out.with_name(out.name + ".truth.json")


def run(args: argparse.Namespace) -> int:
    config = load_sim_config(args.config)
    observations, truth = simulate(config)
    out = Path(args.out)
    write_observations(observations, out)
    atomic_write_json(truth_path(out), truth)
    logger.info(f"Wrote {out} and {truth_path(out)}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="Simulate tracks and winds from a SimConfig JSON")
    parser.add_argument("--config", required=True, help="SimConfig JSON file")
    parser.add_argument("--out", required=True, help="Output interchange CSV")
    parser.set_defaults(func=run)
