"""Weeks x platforms fitting campaign.

Every (platform, week) task pools the reference records with one platform's
records, subsamples per source group and fits the model. Tasks run on a
process pool; rows are collected in task order so the summary never depends
on the number of workers.
"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from windcal.config import get_settings
from windcal.errors import ConfigError, NoCollocationsError, WindcalError
from windcal.models.observations import SENSOR_NAMES, ObservationSet, Sensor
from windcal.models.schemas import CampaignSpec, FitFailure, FitResult
from windcal.services.data_model import read_observations, split_weeks, study_week_starts, subsample, to_epoch_seconds
from windcal.services.empirical import empirical_bias, match_pairs, split_by_antenna
from windcal.services.fit import fit_model
from windcal.services.result_store import atomic_write_csv, atomic_write_json

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "platform",
    "week",
    "week_start",
    "n",
    "c2",
    "se_c2",
    "c3",
    "se_c3",
    "c3_minus_c2",
    "se_c3_minus_c2",
    "noise_sd_diff",
    "se_noise_sd_diff",
    "loglik",
    "converged",
    "status",
    "error",
]
EMPIRICAL_COLUMNS = ["platform", "week", "antenna", "bias", "se", "count", "status"]
FITS_DIR = "fits"


def load_campaign_spec(path: Union[str, Path]) -> CampaignSpec:
    """Read and validate a campaign spec.

    Relative input and output paths are resolved against the spec's directory.

    Raises:
        ConfigError: If the file is missing, not JSON, or invalid
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"campaign spec not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            spec = CampaignSpec.model_validate(json.load(f))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"{path}: invalid campaign spec: {e}") from e

    base = path.parent

    def resolve(p: str) -> str:
        return str(p if Path(p).is_absolute() else base / p)

    return spec.model_copy(
        update={
            "reference_path": resolve(spec.reference_path),
            "platform_paths": {name: resolve(p) for name, p in spec.platform_paths.items()},
            "output_dir": resolve(spec.output_dir),
        }
    )


def resolve_week_starts(spec: CampaignSpec) -> list[float]:
    """Week starts in seconds; "study" expands to the 49-week calendar."""
    if spec.week_starts == "study":
        return study_week_starts()
    return [to_epoch_seconds(value) for value in spec.week_starts]


def task_seed(seed: int, platform_index: int, week_index: int) -> int:
    """Seed of one (platform, week) task, independent of scheduling."""
    return int(np.random.SeedSequence([seed, platform_index, week_index]).generate_state(1, dtype=np.uint32)[0])


def fit_filename(platform: str, week: int) -> str:
    return f"{platform}_week{week:02d}.json"


# ============================================================================
# Tasks
# ============================================================================


@dataclass
class CampaignTask:
    """Inputs of one (platform, week) fit."""

    platform: str
    week: int
    week_start: float
    seed: int
    pooled: ObservationSet
    output_path: str
    spec: CampaignSpec


def _empirical_rows(task: CampaignTask) -> list[dict]:
    spec = task.spec
    ref = task.pooled.take(task.pooled.sensor == Sensor.REFERENCE)
    antennas = split_by_antenna(task.pooled)
    rows = []
    for sensor in (Sensor.STARBOARD, Sensor.PORT):
        row = {"platform": task.platform, "week": task.week, "antenna": SENSOR_NAMES[sensor]}
        cyg = antennas.get((task.platform, int(sensor)))
        try:
            if cyg is None:
                raise NoCollocationsError(f"no {SENSOR_NAMES[sensor]} records")
            pairs = match_pairs(cyg, ref, spec.window_s, spec.max_km, anchor=task.week_start)
            estimate = empirical_bias(pairs)
            row.update({"bias": estimate.bias, "se": estimate.se, "count": estimate.count, "status": "ok"})
        except NoCollocationsError:
            row.update({"bias": None, "se": None, "count": 0, "status": NoCollocationsError.code})
        rows.append(row)
    return rows


def _summary_row(task: CampaignTask, n: int, result: Optional[FitResult], error: Optional[WindcalError]) -> dict:
    row = {name: None for name in SUMMARY_COLUMNS}
    row.update({"platform": task.platform, "week": task.week, "week_start": task.week_start, "n": n})
    if result is None:
        row.update({"converged": False, "status": "failed", "error": f"{error.code}: {error.message}"})
        return row
    bias = result.bias_summary
    row.update(
        {
            "c2": bias.starboard,
            "se_c2": bias.se_starboard,
            "c3": bias.port,
            "se_c3": bias.se_port,
            "c3_minus_c2": bias.port_minus_starboard,
            "se_c3_minus_c2": bias.se_port_minus_starboard,
            "noise_sd_diff": bias.noise_sd_diff,
            "se_noise_sd_diff": bias.se_noise_sd_diff,
            "loglik": result.loglik,
            "converged": result.converged,
            "status": "ok",
            "error": "",
        }
    )
    return row


def run_task(task: CampaignTask) -> tuple[dict, list[dict]]:
    """Fit one (platform, week) and write its document; never raises WindcalError."""
    spec = task.spec
    sample = subsample(task.pooled, spec.n_per_source, task.seed)
    sample = sample.with_provenance(platform=task.platform)
    config = spec.fit.model_copy(update={"seed": task.seed, "threads": 1})
    provenance = dict(sample.provenance)
    try:
        result = fit_model(sample, config)
        atomic_write_json(task.output_path, result.model_dump(mode="json"))
        row = _summary_row(task, len(sample), result, None)
    except (WindcalError, ValueError) as e:
        error = e if isinstance(e, WindcalError) else WindcalError(str(e))
        logger.warning(f"Fit {task.platform} week {task.week} failed: {error.code}: {error.message}")
        failure = FitFailure(error_code=error.code, error=error.message, provenance=provenance)
        atomic_write_json(task.output_path, failure.model_dump(mode="json"))
        row = _summary_row(task, len(sample), None, error)
    empirical = _empirical_rows(task) if spec.empirical else []
    return row, empirical


def build_tasks(spec: CampaignSpec) -> list[CampaignTask]:
    """One task per (platform, week), platforms in sorted order."""
    week_starts = resolve_week_starts(spec)
    reference = read_observations(spec.reference_path)
    reference = reference.take(reference.sensor == Sensor.REFERENCE)
    fits_dir = Path(spec.output_dir) / FITS_DIR

    tasks = []
    for p_index, platform in enumerate(sorted(spec.platform_paths)):
        records = read_observations(spec.platform_paths[platform])
        records = records.take((records.sensor != Sensor.REFERENCE) & (records.platform == platform))
        if len(records) == 0:
            logger.warning(f"No CYGNSS records labeled '{platform}' in {spec.platform_paths[platform]}")
        provenance = {"reference": spec.reference_path, "platform_file": spec.platform_paths[platform]}
        pooled = ObservationSet.concat([reference, records], provenance=provenance)
        for week, week_set in enumerate(split_weeks(pooled, week_starts)):
            tasks.append(
                CampaignTask(
                    platform=platform,
                    week=week,
                    week_start=week_starts[week],
                    seed=task_seed(spec.seed, p_index, week),
                    pooled=week_set,
                    output_path=str(fits_dir / fit_filename(platform, week)),
                    spec=spec,
                )
            )
    return tasks


def run_campaign(spec: CampaignSpec, threads: Optional[int] = None) -> pd.DataFrame:
    """Run every (platform, week) fit and write the campaign outputs.

    Writes ``fits/<platform>_weekNN.json``, ``summary.csv`` and, when enabled,
    ``empirical.csv`` under the output directory.

    Returns:
        The summary table (one row per task regardless of failures)
    """
    tasks = build_tasks(spec)
    workers = threads or spec.threads or get_settings().threads
    logger.info(f"Campaign: {len(tasks)} fits on {workers} worker(s)")

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(run_task, tasks))
    else:
        outputs = [run_task(task) for task in tasks]

    summary = pd.DataFrame([row for row, _ in outputs], columns=SUMMARY_COLUMNS)
    out_dir = Path(spec.output_dir)
    atomic_write_csv(out_dir / "summary.csv", summary)
    if spec.empirical:
        empirical = pd.DataFrame([r for _, rows in outputs for r in rows], columns=EMPIRICAL_COLUMNS)
        atomic_write_csv(out_dir / "empirical.csv", empirical)

    failed = int((summary["status"] != "ok").sum())
    logger.info(f"Campaign done: {len(summary)} rows, {failed} failed, {int(summary['converged'].sum())} converged")
    return summary
