"""Mean-model regression structure with sensor contrasts."""

import logging

import numpy as np
from scipy.linalg import qr

from windcal.errors import IdentifiabilityError, RankDeficiencyError
from windcal.models.observations import ObservationSet, Sensor
from windcal.models.params import Standardization

logger = logging.getLogger(__name__)

DESIGN_COLUMNS = ("intercept", "time", "lat", "lat2", "lat3", "starboard", "port")


def _center_scale(values: np.ndarray) -> tuple[float, float]:
    center = float(np.mean(values))
    scale = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    return center, scale


def standardize(observations: ObservationSet) -> Standardization:
    """Sample-mean centers and n-1 standard-deviation scales for time and latitude.

    A covariate without variation keeps scale 1.
    """
    if len(observations) == 0:
        raise ValueError("cannot standardize an empty set")
    time_center, time_scale = _center_scale(observations.time)
    lat_center, lat_scale = _center_scale(observations.lat)
    return Standardization(time_center=time_center, time_scale=time_scale, lat_center=lat_center, lat_scale=lat_scale)


def check_identifiable(observations: ObservationSet) -> None:
    """Both the reference group and the CYGNSS group must be present.

    Raises:
        IdentifiabilityError: Naming the missing group
    """
    has_reference = bool(np.any(observations.sensor == Sensor.REFERENCE))
    has_cygnss = bool(np.any(observations.sensor != Sensor.REFERENCE))
    if not has_reference:
        raise IdentifiabilityError("no reference-sensor (sensor=1) observations; contrasts are not identifiable")
    if not has_cygnss:
        raise IdentifiabilityError("no CYGNSS-antenna (sensor=2 or 3) observations; contrasts are not identifiable")


def build_design(observations: ObservationSet, std: Standardization) -> np.ndarray:
    """Design matrix [1, t, l, l^2, l^3, 1{starboard}, 1{port}] in record order."""
    check_identifiable(observations)
    t = std.apply_time(observations.time)
    lat = std.apply_lat(observations.lat)
    return np.column_stack(
        [
            np.ones(len(observations)),
            t,
            lat,
            lat**2,
            lat**3,
            (observations.sensor == Sensor.STARBOARD).astype(float),
            (observations.sensor == Sensor.PORT).astype(float),
        ]
    )


def check_rank(X: np.ndarray, columns=DESIGN_COLUMNS, rtol: float = 1e-10) -> None:
    """Detect linearly dependent design columns with a pivoted QR.

    Raises:
        RankDeficiencyError: Listing the columns that the leading ones already span
    """
    if X.shape[0] < X.shape[1]:
        raise RankDeficiencyError(list(columns[X.shape[0]:]))
    _, R, pivots = qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.count_nonzero(diag > rtol * diag[0])) if diag.size and diag[0] > 0 else 0
    if rank < X.shape[1]:
        dependent = [columns[p] for p in sorted(pivots[rank:])]
        logger.warning(f"Design rank {rank} < {X.shape[1]}; dependent columns {dependent}")
        raise RankDeficiencyError(dependent)
