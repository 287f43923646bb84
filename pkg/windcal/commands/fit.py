"""`fit` command: one model fit of a pooled week."""

import argparse
import json
import logging
from pathlib import Path
from typing import Optional

import pandas as pd
from pydantic import ValidationError

from windcal.errors import ConfigError
from windcal.models.schemas import BiasEstimates, FitConfig
from windcal.services.data_model import read_observations
from windcal.services.fit import fit_model
from windcal.services.result_store import atomic_write_json

logger = logging.getLogger(__name__)


def load_fit_config(path: Optional[str]) -> FitConfig:
    """FitConfig from JSON, or the defaults when no path is given.

    Raises:
        ConfigError: If the file is missing or invalid
    """
    if path is None:
        return FitConfig()
    if not Path(path).exists():
        raise ConfigError(f"fit config not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return FitConfig.model_validate(json.load(f))
    except (json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"{path}: invalid fit config: {e}") from e


def bias_table(bias: BiasEstimates) -> pd.DataFrame:
    """Printable estimate/standard-error table."""
    return pd.DataFrame(
        {
            "estimate": [bias.starboard, bias.port, bias.port_minus_starboard, bias.noise_sd_diff],
            "se": [bias.se_starboard, bias.se_port, bias.se_port_minus_starboard, bias.se_noise_sd_diff],
        },
        index=["c2 (starboard)", "c3 (port)", "c3 - c2", "sqrt(2) sigma"],
    )


def run(args: argparse.Namespace) -> int:
    config = load_fit_config(args.config)
    if args.threads is not None:
        config = config.model_copy(update={"threads": args.threads})
    observations = read_observations(args.data)
    result = fit_model(observations, config)
    atomic_write_json(args.out, result.model_dump(mode="json"))
    print(bias_table(result.bias_summary).to_string(float_format=lambda v: f"{v:.4f}"))
    print(f"converged: {str(result.converged).lower()}  loglik: {result.loglik:.6f}  n: {result.n}")
    if not result.converged:
        logger.warning(f"Fit did not converge; wrote best values to {args.out}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("fit", help="Fit the space-time model to one interchange CSV")
    parser.add_argument("data", help="Interchange CSV with reference and CYGNSS records")
    parser.add_argument("--config", default=None, help="FitConfig JSON file")
    parser.add_argument("--out", required=True, help="Output FitResult JSON")
    parser.add_argument("--threads", type=int, default=None, help="Factor-block worker threads")
    parser.set_defaults(func=run)
