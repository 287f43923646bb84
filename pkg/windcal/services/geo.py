"""Distances on the sphere and the scaled space-time metric."""

import logging

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import cdist

from windcal.models.observations import SpaceTimePoint

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0


def to_cartesian(lon, lat) -> np.ndarray:
    """Embed longitudes/latitudes (degrees) on a sphere of radius 6371 km.

    Returns:
        Array of shape (n, 3) in km
    """
    lon_r = np.radians(np.asarray(lon, dtype=float))
    lat_r = np.radians(np.asarray(lat, dtype=float))
    cos_lat = np.cos(lat_r)
    xyz = np.stack([cos_lat * np.cos(lon_r), cos_lat * np.sin(lon_r), np.sin(lat_r)], axis=-1)
    return EARTH_RADIUS_KM * np.atleast_2d(xyz)


def _check_ranges(theta3: float, theta4: float) -> None:
    if not (theta3 > 0.0 and theta4 > 0.0):
        raise ValueError(f"ranges must be positive, got theta3={theta3}, theta4={theta4}")


def scaled_coordinates(lon, lat, time, theta3: float, theta4: float) -> np.ndarray:
    """Euclidean embedding in which distances equal the scaled space-time distance.

    Returns:
        Array of shape (n, 4): chordal xyz / theta3 and time / theta4
    """
    _check_ranges(theta3, theta4)
    xyz = to_cartesian(lon, lat) / theta3
    t = np.asarray(time, dtype=float).reshape(-1, 1) / theta4
    return np.hstack([xyz, t])


def chordal_distance(p: SpaceTimePoint, q: SpaceTimePoint) -> float:
    """Straight-line distance (km) between two points on the sphere."""
    a = to_cartesian(p.lon, p.lat)[0]
    b = to_cartesian(q.lon, q.lat)[0]
    return float(np.linalg.norm(a - b))


def great_circle_distance(p: SpaceTimePoint, q: SpaceTimePoint) -> float:
    """Arc length (km) between two points on the sphere."""
    chord = chordal_distance(p, q)
    return float(2.0 * EARTH_RADIUS_KM * np.arcsin(min(1.0, chord / (2.0 * EARTH_RADIUS_KM))))


def scaled_distance(p: SpaceTimePoint, q: SpaceTimePoint, theta3: float, theta4: float) -> float:
    """sqrt(chord^2 / theta3^2 + dt^2 / theta4^2).

    Raises:
        ValueError: If a range is not positive
    """
    _check_ranges(theta3, theta4)
    chord = chordal_distance(p, q)
    dt = p.time - q.time
    return float(np.sqrt((chord / theta3) ** 2 + (dt / theta4) ** 2))


def max_chordal_extent(lon, lat, block: int = 2048) -> float:
    """Largest pairwise chordal distance (km) in a point set.

    The diameter is attained between convex hull vertices; degenerate
    configurations (coplanar or fewer than four points) use a blocked scan.
    """
    xyz = np.unique(to_cartesian(lon, lat), axis=0)
    if xyz.shape[0] < 2:
        return 0.0
    candidates = xyz
    if xyz.shape[0] >= 4:
        try:
            candidates = xyz[ConvexHull(xyz).vertices]
        except QhullError:
            logger.debug("Convex hull degenerate; scanning all points")
    extent = 0.0
    for start in range(0, candidates.shape[0], block):
        extent = max(extent, float(cdist(candidates[start:start + block], candidates).max()))
    return extent
