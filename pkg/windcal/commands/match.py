"""`match` command: windowed collocation of CYGNSS antennas against the reference."""

import argparse
import logging
from pathlib import Path

import pandas as pd

from windcal.errors import NoCollocationsError
from windcal.models.observations import SENSOR_NAMES, Sensor
from windcal.services.data_model import read_observations
from windcal.services.empirical import (
    bins_frame,
    difference_vs_average,
    empirical_bias,
    match_pairs,
    pairs_frame,
    split_by_antenna,
)
from windcal.services.result_store import atomic_write_csv

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["platform", "antenna", "bias", "se", "count", "status"]


def run(args: argparse.Namespace) -> int:
    cyg = read_observations(args.cyg)
    ref = read_observations(args.ref)
    ref = ref.take(ref.sensor == Sensor.REFERENCE)
    out_dir = Path(args.out_dir)

    rows = []
    for (platform, sensor), records in split_by_antenna(cyg).items():
        antenna = SENSOR_NAMES[Sensor(sensor)]
        pairs = match_pairs(records, ref, args.window_s, args.max_km, anchor=args.anchor)
        stem = f"{platform}_{antenna}"
        atomic_write_csv(out_dir / f"{stem}_pairs.csv", pairs_frame(pairs))
        atomic_write_csv(out_dir / f"{stem}_bins.csv", bins_frame(difference_vs_average(pairs, args.bin_width)))
        try:
            estimate = empirical_bias(pairs)
            rows.append([platform, antenna, estimate.bias, estimate.se, estimate.count, "ok"])
        except NoCollocationsError:
            logger.info(f"No collocations for {platform} {antenna}")
            rows.append([platform, antenna, None, None, 0, NoCollocationsError.code])

    summary = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    atomic_write_csv(out_dir / "match_summary.csv", summary)
    print(summary.to_string(index=False) if len(summary) else "no CYGNSS records")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("match", help="Closest-pair matchups per time window")
    parser.add_argument("cyg", help="Interchange CSV with CYGNSS records")
    parser.add_argument("ref", help="Interchange CSV with reference records")
    parser.add_argument("--window-s", type=float, default=7200.0, help="Window length in seconds")
    parser.add_argument("--max-km", type=float, default=25.0, help="Largest accepted separation (km)")
    parser.add_argument("--bin-width", type=float, default=1.0, help="Average-wind bin width (m/s)")
    parser.add_argument("--anchor", type=float, default=0.0, help="Time of a window boundary (s)")
    parser.add_argument("--out-dir", required=True, help="Output directory")
    parser.set_defaults(func=run)
