"""Plot-data tables built from a campaign results directory."""

import json
import logging
from itertools import combinations
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from windcal.models.schemas import FitFailure, FitResult
from windcal.services.campaign_service import EMPIRICAL_COLUMNS, FITS_DIR, fit_filename
from windcal.services.result_store import atomic_write_csv, read_json

logger = logging.getLogger(__name__)

QUANTITIES = ("starboard", "port", "port_minus_starboard", "noise_sd_diff")


# ============================================================================
# Loading
# ============================================================================


def load_results(results_dir: Union[str, Path]) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Collect successful fits and list the files that could not be used.

    Expected files come from ``summary.csv`` when present, so fits that were
    never written are reported as missing.

    Returns:
        (one row per successful fit with platform, week and bias fields,
        skipped files with path and reason)
    """
    results_dir = Path(results_dir)
    fits_dir = results_dir / FITS_DIR
    paths = sorted(fits_dir.glob("*.json")) if fits_dir.is_dir() else []
    skipped = []

    summary_path = results_dir / "summary.csv"
    if summary_path.exists():
        summary = pd.read_csv(summary_path)
        present = {p.name for p in paths}
        for platform, week in zip(summary["platform"], summary["week"]):
            name = fit_filename(str(platform), int(week))
            if name not in present:
                skipped.append({"path": str(fits_dir / name), "reason": "missing"})

    rows = []
    for path in paths:
        try:
            data = read_json(path)
        except (OSError, json.JSONDecodeError) as e:
            skipped.append({"path": str(path), "reason": f"unreadable: {e}"})
            continue
        if isinstance(data, dict) and data.get("status") == "failed":
            try:
                failure = FitFailure.model_validate(data)
                skipped.append({"path": str(path), "reason": f"failed fit: {failure.error_code}"})
            except ValidationError as e:
                skipped.append({"path": str(path), "reason": f"malformed: {e.error_count()} validation errors"})
            continue
        try:
            result = FitResult.model_validate(data)
        except ValidationError as e:
            skipped.append({"path": str(path), "reason": f"malformed: {e.error_count()} validation errors"})
            continue
        data_prov = result.provenance.get("data", {})
        if "platform" not in data_prov or "week" not in data_prov:
            skipped.append({"path": str(path), "reason": "malformed: provenance lacks platform or week"})
            continue
        bias = result.bias_summary
        rows.append(
            {
                "platform": str(data_prov["platform"]),
                "week": int(data_prov["week"]),
                "starboard": bias.starboard,
                "se_starboard": bias.se_starboard,
                "port": bias.port,
                "se_port": bias.se_port,
                "port_minus_starboard": bias.port_minus_starboard,
                "se_port_minus_starboard": bias.se_port_minus_starboard,
                "noise_sd_diff": bias.noise_sd_diff,
                "se_noise_sd_diff": bias.se_noise_sd_diff,
                "converged": result.converged,
            }
        )

    fits = pd.DataFrame(rows, columns=["platform", "week", *_with_se(QUANTITIES), "converged"])
    fits = fits.sort_values(["platform", "week"], kind="stable").reset_index(drop=True)
    for item in skipped:
        logger.warning(f"Skipping {item['path']}: {item['reason']}")
    return fits, pd.DataFrame(skipped, columns=["path", "reason"])


def _with_se(names) -> list[str]:
    return [col for name in names for col in (name, f"se_{name}")]


# ============================================================================
# Tables
# ============================================================================


def weekly_biases(fits: pd.DataFrame) -> pd.DataFrame:
    """Starboard and port rows per fit, linked by a shared pair id."""
    frames = []
    for antenna in ("starboard", "port"):
        frames.append(
            pd.DataFrame(
                {
                    "platform": fits["platform"],
                    "week": fits["week"],
                    "antenna": antenna,
                    "bias": fits[antenna],
                    "se": fits[f"se_{antenna}"],
                    "pair_id": fits["platform"] + "-w" + fits["week"].astype(str).str.zfill(2),
                }
            )
        )
    table = pd.concat(frames, ignore_index=True)
    return table.sort_values(["platform", "week", "antenna"], kind="stable").reset_index(drop=True)


def sorted_quantiles(fits: pd.DataFrame, quantity: str) -> pd.DataFrame:
    """Per-platform estimates sorted non-decreasing with rank and plotting position."""
    frames = []
    for platform, group in fits.groupby("platform", sort=True):
        group = group.sort_values([quantity, "week"], kind="stable")
        k = len(group)
        frames.append(
            pd.DataFrame(
                {
                    "platform": platform,
                    "rank": np.arange(1, k + 1),
                    "plotting_position": (np.arange(1, k + 1) - 0.5) / k,
                    "week": group["week"].to_numpy(),
                    "value": group[quantity].to_numpy(),
                    "se": group[f"se_{quantity}"].to_numpy(),
                }
            )
        )
    columns = ["platform", "rank", "plotting_position", "week", "value", "se"]
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=columns)


def model_vs_empirical(fits: pd.DataFrame, empirical: pd.DataFrame) -> pd.DataFrame:
    """Weekly model and empirical biases averaged per platform and antenna."""
    rows = []
    ok = empirical[empirical["status"] == "ok"] if len(empirical) else empirical
    for platform in sorted(set(fits["platform"]) | set(ok["platform"] if len(ok) else [])):
        for antenna in ("starboard", "port"):
            model = fits.loc[fits["platform"] == platform, antenna]
            emp = ok.loc[(ok["platform"] == platform) & (ok["antenna"] == antenna), "bias"] if len(ok) else []
            rows.append(
                {
                    "platform": platform,
                    "antenna": antenna,
                    "model_bias": float(model.mean()) if len(model) else np.nan,
                    "model_weeks": int(len(model)),
                    "empirical_bias": float(np.mean(emp)) if len(emp) else np.nan,
                    "empirical_weeks": int(len(emp)),
                }
            )
    return pd.DataFrame(
        rows, columns=["platform", "antenna", "model_bias", "model_weeks", "empirical_bias", "empirical_weeks"]
    )


def platform_summary(fits: pd.DataFrame) -> pd.DataFrame:
    """Mean, range and count of negative weeks per platform and quantity."""
    rows = []
    for platform, group in fits.groupby("platform", sort=True):
        for quantity in QUANTITIES:
            values = group[quantity]
            rows.append(
                {
                    "platform": platform,
                    "quantity": quantity,
                    "mean": float(values.mean()),
                    "min": float(values.min()),
                    "max": float(values.max()),
                    "weeks": int(len(values)),
                    "negative_weeks": int((values < 0).sum()),
                }
            )
    return pd.DataFrame(rows, columns=["platform", "quantity", "mean", "min", "max", "weeks", "negative_weeks"])


def sensor_pair_biases(fits: pd.DataFrame) -> pd.DataFrame:
    """Averaged indirect bias between every pair of CYGNSS sensors.

    Each sensor's average contrast against the reference is differenced, so
    "cyg04 starboard" minus "cyg01 port" uses the reference as a common link.
    """
    sensors = []
    for platform, group in fits.groupby("platform", sort=True):
        for antenna in ("starboard", "port"):
            sensors.append((f"{platform} {antenna}", float(group[antenna].mean())))
    rows = [
        {"sensor_a": a, "sensor_b": b, "bias_a_minus_b": mean_a - mean_b, "abs_bias": abs(mean_a - mean_b)}
        for (a, mean_a), (b, mean_b) in combinations(sensors, 2)
    ]
    return pd.DataFrame(rows, columns=["sensor_a", "sensor_b", "bias_a_minus_b", "abs_bias"])


def build_report(results_dir: Union[str, Path], out_dir: Union[str, Path, None] = None) -> dict[str, Path]:
    """Write every plot-data table for a results directory.

    Returns:
        Mapping from table name to written path
    """
    results_dir = Path(results_dir)
    out_dir = Path(out_dir) if out_dir else results_dir / "report"
    fits, skipped = load_results(results_dir)

    empirical_path = results_dir / "empirical.csv"
    if empirical_path.exists():
        empirical = pd.read_csv(empirical_path)
    else:
        empirical = pd.DataFrame(columns=EMPIRICAL_COLUMNS)

    tables = {
        "weekly_biases.csv": weekly_biases(fits),
        "port_minus_starboard_quantiles.csv": sorted_quantiles(fits, "port_minus_starboard"),
        "noise_quantiles.csv": sorted_quantiles(fits, "noise_sd_diff"),
        "model_vs_empirical.csv": model_vs_empirical(fits, empirical),
        "platform_summary.csv": platform_summary(fits),
        "sensor_pair_biases.csv": sensor_pair_biases(fits),
        "skipped_files.csv": skipped,
    }
    written = {name: atomic_write_csv(out_dir / name, table) for name, table in tables.items()}
    logger.info(f"Report: {len(fits)} fits, {len(skipped)} skipped, tables in {out_dir}")
    return written
