"""Windowed closest-pair matchups and empirical bias estimates."""

import logging
from typing import Optional

import numpy as np
import pandas as pd
from scipy import stats
from scipy.spatial import cKDTree

from windcal.errors import InsufficientDataError, NoCollocationsError
from windcal.models.observations import ObservationSet, Sensor
from windcal.models.schemas import (
    BinnedDifference,
    DifferenceTrend,
    EmpiricalBias,
    MatchedPair,
    MatchedPairs,
)
from windcal.services.geo import to_cartesian

logger = logging.getLogger(__name__)

PAIR_COLUMNS = ["window_id", "sep_km", "t_cyg", "t_ref", "wind_cyg", "wind_ref"]
BIN_COLUMNS = ["bin_center", "mean_diff", "count"]

# Slack on the kd-tree radius; exact distances decide afterwards.
_RADIUS_SLACK_KM = 1e-6


def pair_distances(xyz_a: np.ndarray, xyz_b: np.ndarray) -> np.ndarray:
    """Row-wise chordal distance between aligned Cartesian arrays (km)."""
    return np.sqrt(np.sum((np.atleast_2d(xyz_a) - np.atleast_2d(xyz_b)) ** 2, axis=-1))


def window_ids(time, window_s: float, anchor: float = 0.0) -> np.ndarray:
    """Index of the half-open window [anchor + k w, anchor + (k + 1) w) holding each time."""
    return np.floor((np.asarray(time, dtype=float) - anchor) / window_s).astype(np.int64)


def _closest_in_window(
    cyg_xyz: np.ndarray, ref_xyz: np.ndarray, cyg_time: np.ndarray, ref_time: np.ndarray, max_km: float
) -> Optional[tuple[int, int, float]]:
    tree = cKDTree(ref_xyz)
    nearest, _ = tree.query(cyg_xyz, k=1)
    d_min = float(np.min(nearest))
    if d_min > max_km + _RADIUS_SLACK_KM:
        return None

    # Enumerate every pair near the minimum, then settle it with exact distances.
    radius = d_min + _RADIUS_SLACK_KM
    candidates = []
    for i in np.flatnonzero(nearest <= radius):
        for j in tree.query_ball_point(cyg_xyz[i], r=radius):
            candidates.append((i, j))
    ci = np.array([c[0] for c in candidates], dtype=np.int64)
    rj = np.array([c[1] for c in candidates], dtype=np.int64)
    sep = pair_distances(cyg_xyz[ci], ref_xyz[rj])
    best_sep = float(np.min(sep))
    if best_sep > max_km:
        return None
    tied = sep == best_sep
    ci, rj = ci[tied], rj[tied]
    pick = np.lexsort((rj, ci, ref_time[rj], cyg_time[ci]))[0]
    return int(ci[pick]), int(rj[pick]), best_sep


def match_pairs(
    cyg: ObservationSet,
    ref: ObservationSet,
    window_s: float = 7200.0,
    max_km: float = 25.0,
    anchor: float = 0.0,
) -> MatchedPairs:
    """Closest CYGNSS/reference pair in every time window.

    A window contributes its single closest pair by chordal separation when
    that separation is at most ``max_km``. Ties go to the earlier CYGNSS time,
    then the earlier reference time, then the lower input positions.

    Args:
        cyg: Records of one platform antenna
        ref: Reference-sensor records
        window_s: Window length (s)
        max_km: Largest accepted separation (km), inclusive
        anchor: Time of a window boundary

    Returns:
        MatchedPairs in increasing window order (possibly empty)
    """
    if not window_s > 0.0:
        raise ValueError(f"window_s must be positive, got {window_s}")
    if max_km < 0.0:
        raise ValueError(f"max_km must be non-negative, got {max_km}")

    result = MatchedPairs(window_s=window_s, max_km=max_km, anchor=anchor)
    if len(cyg) == 0 or len(ref) == 0:
        return result

    cyg_win = window_ids(cyg.time, window_s, anchor)
    ref_win = window_ids(ref.time, window_s, anchor)
    cyg_xyz = to_cartesian(cyg.lon, cyg.lat)
    ref_xyz = to_cartesian(ref.lon, ref.lat)

    pairs = []
    for wid in np.intersect1d(cyg_win, ref_win):
        ci = np.flatnonzero(cyg_win == wid)
        rj = np.flatnonzero(ref_win == wid)
        found = _closest_in_window(cyg_xyz[ci], ref_xyz[rj], cyg.time[ci], ref.time[rj], max_km)
        if found is None:
            continue
        i, j, sep = found
        pairs.append(MatchedPair(window_id=int(wid), sep_km=sep, cyg=cyg.record(ci[i]), ref=ref.record(rj[j])))

    logger.debug(f"match_pairs: {len(pairs)} pairs from {np.unique(cyg_win).size} CYGNSS windows")
    return result.model_copy(update={"pairs": pairs})


def split_by_antenna(observations: ObservationSet) -> dict[tuple[str, int], ObservationSet]:
    """CYGNSS records grouped by (platform, antenna sensor code), sorted by key."""
    groups = {}
    cygnss = observations.sensor != Sensor.REFERENCE
    keys = sorted({(str(p), int(s)) for p, s in zip(observations.platform[cygnss], observations.sensor[cygnss])})
    for platform, sensor in keys:
        mask = (observations.platform == platform) & (observations.sensor == sensor)
        groups[(platform, sensor)] = observations.take(mask)
    return groups


def _differences(pairs: MatchedPairs) -> tuple[np.ndarray, np.ndarray]:
    cyg = np.array([p.cyg.wind for p in pairs.pairs], dtype=float)
    ref = np.array([p.ref.wind for p in pairs.pairs], dtype=float)
    return cyg, ref


def empirical_bias(pairs: MatchedPairs) -> EmpiricalBias:
    """Mean CYGNSS-minus-reference difference with its standard error.

    Raises:
        NoCollocationsError: If there are no pairs
    """
    if len(pairs) == 0:
        raise NoCollocationsError("no collocated pairs within the window and distance limits")
    cyg, ref = _differences(pairs)
    diff = cyg - ref
    se = float(np.std(diff, ddof=1) / np.sqrt(diff.size)) if diff.size >= 2 else None
    return EmpiricalBias(bias=float(np.mean(diff)), se=se, count=int(diff.size))


def difference_vs_average(pairs: MatchedPairs, bin_width: float = 1.0) -> list[BinnedDifference]:
    """Mean pair difference binned by pair average.

    Bins are centered at multiples of ``bin_width`` and half-open on the right.
    """
    if not bin_width > 0.0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    if len(pairs) == 0:
        return []
    cyg, ref = _differences(pairs)
    frame = pd.DataFrame({"avg": (cyg + ref) / 2.0, "diff": cyg - ref})
    frame["bin"] = np.floor(frame["avg"] / bin_width + 0.5).astype(np.int64)
    grouped = frame.groupby("bin", sort=True)["diff"].agg(["mean", "count"])
    return [
        BinnedDifference(bin_center=float(k * bin_width), mean_diff=float(row["mean"]), count=int(row["count"]))
        for k, row in grouped.iterrows()
    ]


def difference_trend(pairs: MatchedPairs, confidence: float = 0.95) -> DifferenceTrend:
    """Least-squares slope of pair difference on pair average.

    A slope interval excluding zero indicates wind-dependent apparent bias,
    which noisy measurements produce even without a true dependence.

    Raises:
        InsufficientDataError: If fewer than three pairs are available
    """
    if len(pairs) < 3:
        raise InsufficientDataError(f"difference trend needs at least 3 pairs, got {len(pairs)}")
    cyg, ref = _differences(pairs)
    fit = stats.linregress((cyg + ref) / 2.0, cyg - ref)
    half = float(stats.t.ppf(0.5 + confidence / 2.0, len(pairs) - 2) * fit.stderr)
    return DifferenceTrend(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        se_slope=float(fit.stderr),
        ci_low=float(fit.slope) - half,
        ci_high=float(fit.slope) + half,
        count=len(pairs),
    )


def pairs_frame(pairs: MatchedPairs) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "window_id": p.window_id,
                "sep_km": p.sep_km,
                "t_cyg": p.cyg.time,
                "t_ref": p.ref.time,
                "wind_cyg": p.cyg.wind,
                "wind_ref": p.ref.wind,
            }
            for p in pairs.pairs
        ],
        columns=PAIR_COLUMNS,
    )


def bins_frame(bins: list[BinnedDifference]) -> pd.DataFrame:
    return pd.DataFrame([b.model_dump() for b in bins], columns=BIN_COLUMNS)
