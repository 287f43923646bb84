"""Interchange CSV ingestion, subsampling and weekly splitting."""

import io
import logging
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional, TextIO, Union

import numpy as np
import pandas as pd
from dateutil import parser as dateutil_parser

from windcal.errors import ParseError
from windcal.models.observations import ObservationSet, Sensor, normalize_longitude

logger = logging.getLogger(__name__)

HEADER = ("time_s", "lon_deg", "lat_deg", "wind_ms", "sensor", "platform")
TIME_ORIGIN = datetime(2020, 1, 1, tzinfo=timezone.utc)
WEEK_SECONDS = 7 * 86400.0

# Study calendar: 2019-09-28 to 2020-09-25, minus the reference-sensor gaps.
STUDY_START = datetime(2019, 9, 28, tzinfo=timezone.utc)
STUDY_END = datetime(2020, 9, 26, tzinfo=timezone.utc)
STUDY_GAPS = (
    (datetime(2020, 2, 1, tzinfo=timezone.utc), datetime(2020, 2, 15, tzinfo=timezone.utc)),
    (datetime(2020, 6, 13, tzinfo=timezone.utc), datetime(2020, 6, 20, tzinfo=timezone.utc)),
)


def to_epoch_seconds(value: Union[datetime, str, float, int]) -> float:
    """Convert a timestamp to seconds since 2020-01-01 00:00 UTC.

    Args:
        value: datetime, ISO-8601 string, or a number already in seconds

    Returns:
        Seconds since the time origin (naive datetimes are taken as UTC)
    """
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        value = dateutil_parser.isoparse(value)
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return (value - TIME_ORIGIN).total_seconds()


def study_week_starts() -> list[float]:
    """Weekly window starts of the one-year study period.

    Weeks overlapping a reference-sensor gap are omitted, leaving 49 weeks.
    """
    starts = []
    current = STUDY_START
    while current + timedelta(days=7) <= STUDY_END:
        end = current + timedelta(days=7)
        if not any(current < gap_end and end > gap_start for gap_start, gap_end in STUDY_GAPS):
            starts.append(to_epoch_seconds(current))
        current = end
    return starts


# ============================================================================
# Interchange format
# ============================================================================


def _first_bad(mask: np.ndarray) -> Optional[int]:
    hits = np.flatnonzero(mask)
    return int(hits[0]) if hits.size else None


def parse_observations(stream: TextIO, source: Optional[str] = None) -> ObservationSet:
    """Parse the interchange CSV format.

    Args:
        stream: Character stream with header ``time_s,lon_deg,lat_deg,wind_ms,sensor,platform``
        source: Optional name recorded in provenance

    Returns:
        ObservationSet with all rows in file order and longitudes wrapped

    Raises:
        ParseError: If the file is empty, the header is wrong, or a row is invalid
    """
    header_line = None
    line_numbers = []
    rows = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip().lstrip("\ufeff")
        if not line or line.startswith("#"):
            continue
        if header_line is None:
            header_line = lineno
            if tuple(field.strip() for field in line.split(",")) != HEADER:
                raise ParseError(f"expected header '{','.join(HEADER)}', got '{line}'", line=lineno)
            continue
        fields = [field.strip() for field in line.split(",")]
        if len(fields) != len(HEADER):
            raise ParseError(f"expected {len(HEADER)} fields, found {len(fields)}", line=lineno)
        rows.append(fields)
        line_numbers.append(lineno)

    if header_line is None:
        raise ParseError("empty file: no header found")

    provenance = {"source": source} if source else {}
    if not rows:
        logger.warning(f"No observation rows in {source or 'stream'}")
        return ObservationSet.empty(provenance)

    frame = pd.DataFrame(rows, columns=list(HEADER))
    numeric = {name: pd.to_numeric(frame[name], errors="coerce").to_numpy(dtype=float) for name in HEADER[:5]}

    for name in HEADER[:4]:
        bad = _first_bad(~np.isfinite(numeric[name]))
        if bad is not None:
            raise ParseError(f"{name} '{rows[bad][HEADER.index(name)]}' is not a finite number", line=line_numbers[bad])

    sensor = numeric["sensor"]
    bad = _first_bad(~np.isin(sensor, [float(s) for s in Sensor]))
    if bad is not None:
        raise ParseError(f"unknown sensor code '{rows[bad][4]}'", line=line_numbers[bad])

    lat = numeric["lat_deg"]
    bad = _first_bad((lat < -90.0) | (lat > 90.0))
    if bad is not None:
        raise ParseError(f"latitude {lat[bad]} outside [-90, 90]", line=line_numbers[bad])

    wind = numeric["wind_ms"]
    bad = _first_bad(wind < 0.0)
    if bad is not None:
        raise ParseError(f"negative wind speed {wind[bad]}", line=line_numbers[bad])

    platform = frame["platform"].to_numpy(dtype=object)
    bad = _first_bad(np.array([not p for p in platform]))
    if bad is not None:
        raise ParseError("empty platform label", line=line_numbers[bad])

    result = ObservationSet(
        time=numeric["time_s"],
        lon=normalize_longitude(numeric["lon_deg"]),
        lat=lat,
        wind=wind,
        sensor=sensor.astype(np.int64),
        platform=platform,
        provenance=provenance,
    )
    logger.debug(f"Parsed {len(result)} observations from {source or 'stream'}")
    return result


def observations_frame(observations: ObservationSet) -> pd.DataFrame:
    """Interchange columns of a set as a DataFrame."""
    return pd.DataFrame(
        {
            "time_s": observations.time,
            "lon_deg": observations.lon,
            "lat_deg": observations.lat,
            "wind_ms": observations.wind,
            "sensor": observations.sensor.astype(np.int64),
            "platform": observations.platform.astype(str),
        },
        columns=list(HEADER),
    )


def serialize_observations(observations: ObservationSet, stream: TextIO) -> None:
    """Write a set in the interchange format (10 significant digits)."""
    observations_frame(observations).to_csv(stream, index=False, float_format="%.10g", lineterminator="\n")


def read_observations(path: Union[str, Path]) -> ObservationSet:
    """Read an interchange CSV file.

    Raises:
        FileNotFoundError: If the path does not exist
        ParseError: If the content is invalid
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        return parse_observations(f, source=str(path))


def write_observations(observations: ObservationSet, path: Union[str, Path]) -> Path:
    """Write an interchange CSV file, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.StringIO()
    serialize_observations(observations, buffer)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(buffer.getvalue())
    logger.info(f"Wrote {len(observations)} observations to {path}")
    return path


# ============================================================================
# Subsampling and weekly windows
# ============================================================================


def subsample(observations: ObservationSet, n_per_source: int, seed: int) -> ObservationSet:
    """Draw up to ``n_per_source`` records from each source group.

    The reference group holds sensor 1 records and the CYGNSS group holds
    sensors 2 and 3. Selected rows keep their file order.

    Args:
        observations: Input set
        n_per_source: Sample size per group (groups smaller than this are kept whole)
        seed: Random seed

    Returns:
        Subsampled set with provenance describing the draw
    """
    if n_per_source < 1:
        raise ValueError(f"n_per_source must be >= 1, got {n_per_source}")

    rng = np.random.default_rng(seed)
    groups = {
        "reference": np.flatnonzero(observations.sensor == Sensor.REFERENCE),
        "cygnss": np.flatnonzero(observations.sensor != Sensor.REFERENCE),
    }
    selected = []
    notes = []
    for name, members in groups.items():
        if members.size <= n_per_source:
            selected.append(members)
            if members.size < n_per_source:
                notes.append(f"{name} group has {members.size} < {n_per_source} records; kept whole")
        else:
            selected.append(rng.choice(members, size=n_per_source, replace=False))

    indices = np.sort(np.concatenate(selected))
    provenance = dict(observations.provenance)
    provenance["subsample"] = {"n_per_source": n_per_source, "seed": seed, "notes": notes}
    for note in notes:
        logger.info(f"Subsample: {note}")
    return observations.take(indices, provenance=provenance)


def split_weeks(observations: ObservationSet, week_starts: list[float]) -> list[ObservationSet]:
    """Split a set into half-open weekly windows [start, start + 7 days).

    Each record goes to the latest window start at or before its time, if it
    lies inside that window; records outside every window are dropped.

    Raises:
        ValueError: If week_starts is empty or not strictly increasing
    """
    if len(week_starts) == 0:
        raise ValueError("week_starts must not be empty")
    starts = np.asarray(week_starts, dtype=float)
    if np.any(np.diff(starts) <= 0):
        raise ValueError("week_starts must be strictly increasing")

    slot = np.searchsorted(starts, observations.time, side="right") - 1
    inside = (slot >= 0) & (observations.time < starts[np.clip(slot, 0, None)] + WEEK_SECONDS)
    slot = np.where(inside, slot, -1)
    dropped = int(np.count_nonzero(~inside))
    if dropped:
        logger.info(f"split_weeks: {dropped} observations outside all windows dropped")

    weeks = []
    for k, start in enumerate(starts):
        provenance = dict(observations.provenance)
        provenance.update({"week": k, "week_start": float(start), "dropped_outside_windows": dropped})
        weeks.append(observations.take(np.flatnonzero(slot == k), provenance=provenance))
    return weeks
