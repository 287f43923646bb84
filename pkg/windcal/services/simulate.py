"""Synthetic tracks, exact Gaussian-process winds and dense oracles."""

import json
import logging
from itertools import combinations
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError
from scipy.linalg import LinAlgError, cho_factor, cho_solve, cholesky
from scipy.spatial.distance import cdist

from windcal.config import get_settings
from windcal.errors import ConfigError, FactorizationError
from windcal.models.observations import ObservationSet, Sensor, normalize_longitude
from windcal.models.params import CovarianceParams, MeanParams
from windcal.models.schemas import SimConfig, TrackSpec
from windcal.services.covariance import covariance_matrix, matern
from windcal.services.design import standardize
from windcal.services.geo import scaled_coordinates, to_cartesian
from windcal.services.vecchia import LOG_2PI, GLSResult

logger = logging.getLogger(__name__)

KM_PER_DEGREE = 111.195


def load_sim_config(path: Union[str, Path]) -> SimConfig:
    """Read and validate a SimConfig JSON file.

    Raises:
        ConfigError: If the file is missing, not JSON, or invalid
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"simulation config not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return SimConfig.model_validate(json.load(f))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"{path}: invalid simulation config: {e}") from e


def replicate_seeds(seed: int, count: int) -> list[int]:
    """Independent child seeds for replicated simulations."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint32)[0]) for child in children]


# ============================================================================
# Tracks
# ============================================================================


def _sample_times(config: SimConfig) -> np.ndarray:
    n_steps = int(np.floor(config.duration_s / config.cadence_s + 1e-9))
    elapsed = np.arange(n_steps) * config.cadence_s
    if config.n_per_platform is not None and config.n_per_platform < n_steps:
        keep = np.unique(np.round(np.linspace(0, n_steps - 1, config.n_per_platform)).astype(np.int64))
        elapsed = elapsed[keep]
    return elapsed


def _centerline(track: TrackSpec, elapsed: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    phase = 2.0 * np.pi * elapsed / track.period_s + track.phase_rad
    lat = track.lat_band_deg * np.sin(phase)
    lon = normalize_longitude(track.lon0_deg + track.lon_rate_deg_s * elapsed)
    return lon, lat


def simulate_tracks(config: SimConfig) -> ObservationSet:
    """Sampling geometry of every platform, winds set to zero.

    CYGNSS-role platforms emit a starboard and a port record per sample,
    displaced perpendicular to the direction of motion by half the
    cross-track offset each and clamped to the latitude band.
    """
    elapsed = _sample_times(config)
    columns = {"time": [], "lon": [], "lat": [], "sensor": [], "platform": []}

    for track in config.platforms:
        lon, lat = _centerline(track, elapsed)
        time = config.start_time + elapsed
        if track.role == "reference":
            parts = [(lon, lat, Sensor.REFERENCE)]
        else:
            # Local east/north velocity (km/s) and the unit vector to the right of it.
            phase = 2.0 * np.pi * elapsed / track.period_s + track.phase_rad
            north = KM_PER_DEGREE * track.lat_band_deg * 2.0 * np.pi / track.period_s * np.cos(phase)
            east = KM_PER_DEGREE * track.lon_rate_deg_s * np.cos(np.radians(lat))
            speed = np.hypot(east, north)
            speed = np.where(speed > 0.0, speed, 1.0)
            right_east, right_north = north / speed, -east / speed
            half = 0.5 * track.cross_track_offset_km
            cos_lat = np.maximum(np.cos(np.radians(lat)), 1e-6)
            parts = []
            for sign, sensor in ((1.0, Sensor.STARBOARD), (-1.0, Sensor.PORT)):
                d_lat = sign * half * right_north / KM_PER_DEGREE
                d_lon = sign * half * right_east / (KM_PER_DEGREE * cos_lat)
                parts.append(
                    (
                        normalize_longitude(lon + d_lon),
                        np.clip(lat + d_lat, -track.lat_band_deg, track.lat_band_deg),
                        sensor,
                    )
                )
        for part_lon, part_lat, sensor in parts:
            columns["time"].append(time)
            columns["lon"].append(part_lon)
            columns["lat"].append(part_lat)
            columns["sensor"].append(np.full(time.size, int(sensor)))
            columns["platform"].append(np.full(time.size, track.name, dtype=object))

    geometry = ObservationSet(
        time=np.concatenate(columns["time"]),
        lon=np.concatenate(columns["lon"]),
        lat=np.concatenate(columns["lat"]),
        wind=np.zeros(sum(t.size for t in columns["time"])),
        sensor=np.concatenate(columns["sensor"]),
        platform=np.concatenate(columns["platform"]),
        provenance={"simulated": True, "seed": config.seed},
    )
    logger.debug(f"Simulated geometry: {len(geometry)} records on {len(config.platforms)} platforms")
    return geometry


def platform_distance_series(config: SimConfig, step_s: Optional[float] = None) -> pd.DataFrame:
    """Chordal distance between every pair of platform centerlines over time.

    Returns:
        DataFrame with columns time_s, platform_a, platform_b, distance_km
    """
    step = step_s or config.cadence_s
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    elapsed = np.arange(0.0, config.duration_s, step)
    xyz = {}
    for track in config.platforms:
        lon, lat = _centerline(track, elapsed)
        xyz[track.name] = to_cartesian(lon, lat)

    frames = []
    for a, b in combinations([t.name for t in config.platforms], 2):
        frames.append(
            pd.DataFrame(
                {
                    "time_s": config.start_time + elapsed,
                    "platform_a": a,
                    "platform_b": b,
                    "distance_km": np.linalg.norm(xyz[a] - xyz[b], axis=1),
                }
            )
        )
    if not frames:
        return pd.DataFrame(columns=["time_s", "platform_a", "platform_b", "distance_km"])
    return pd.concat(frames, ignore_index=True)


# ============================================================================
# Winds
# ============================================================================


def simulate_winds(
    geometry: ObservationSet,
    theta: CovarianceParams,
    mean: MeanParams,
    seed: int,
    platform_biases: Optional[dict[str, tuple[float, float]]] = None,
) -> ObservationSet:
    """Draw winds from the model at the geometry's records.

    The anomaly is drawn exactly at the unique space-time points, so that
    coincident starboard and port records share it. The b coefficients act on
    the geometry's own standardized time and latitude. Draws below zero are
    truncated at zero and counted in provenance.

    Args:
        geometry: Records whose winds are replaced
        theta: True covariance parameters
        mean: True mean coefficients and contrasts
        seed: Random seed
        platform_biases: Optional {platform: (c2, c3)} overrides

    Raises:
        ValueError: If the geometry exceeds the dense simulation limit
        FactorizationError: If the anomaly covariance cannot be factorized
    """
    n = len(geometry)
    limit = get_settings().simulate_max_n
    if n > limit:
        raise ValueError(f"dense simulation refuses {n} records (limit {limit})")

    z_stream, noise_stream = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    points = np.column_stack([geometry.lon, geometry.lat, geometry.time])
    unique, inverse = np.unique(points, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)

    anomaly = np.zeros(unique.shape[0])
    if theta.theta1 > 0.0 and unique.shape[0] > 0:
        coords = scaled_coordinates(unique[:, 0], unique[:, 1], unique[:, 2], theta.theta3, theta.theta4)
        K = theta.theta1 * matern(cdist(coords, coords), theta.theta2)
        K[np.diag_indices_from(K)] += 1e-10 * theta.theta1
        try:
            L = cholesky(K, lower=True)
        except LinAlgError as e:
            raise FactorizationError(f"anomaly covariance of {unique.shape[0]} points is not positive definite") from e
        anomaly = L @ z_stream.standard_normal(unique.shape[0])

    std = standardize(geometry) if n else None
    wind = np.zeros(n)
    if n:
        t = std.apply_time(geometry.time)
        lat = std.apply_lat(geometry.lat)
        wind = mean.b0 + mean.b1 * t + mean.b2 * lat + mean.b3 * lat**2 + mean.b4 * lat**3
        offsets = np.where(geometry.sensor == Sensor.STARBOARD, mean.c2, 0.0)
        offsets = np.where(geometry.sensor == Sensor.PORT, mean.c3, offsets)
        for platform, (c2, c3) in (platform_biases or {}).items():
            on_platform = geometry.platform == platform
            offsets = np.where(on_platform & (geometry.sensor == Sensor.STARBOARD), c2, offsets)
            offsets = np.where(on_platform & (geometry.sensor == Sensor.PORT), c3, offsets)
        wind = wind + offsets + anomaly[inverse] + np.sqrt(theta.nugget) * noise_stream.standard_normal(n)

    clipped = int(np.count_nonzero(wind < 0.0))
    if clipped:
        logger.warning(f"simulate_winds: {clipped} negative draws truncated at 0")
    provenance = dict(geometry.provenance)
    provenance.update({"wind_seed": seed, "clipped_negative": clipped, "unique_points": int(unique.shape[0])})
    return geometry.with_wind(np.maximum(wind, 0.0), provenance=provenance)


def track_biases(config: SimConfig) -> dict[str, tuple[float, float]]:
    """Per-platform (c2, c3) truth, falling back to the config's mean contrasts."""
    return {
        track.name: (
            track.starboard_bias if track.starboard_bias is not None else config.mean.c2,
            track.port_bias if track.port_bias is not None else config.mean.c3,
        )
        for track in config.platforms
        if track.role == "cygnss"
    }


def simulate(config: SimConfig) -> tuple[ObservationSet, dict]:
    """Tracks and winds for a SimConfig, plus the truth document."""
    geometry = simulate_tracks(config)
    biases = track_biases(config)
    observations = simulate_winds(geometry, config.theta, config.mean, config.seed, biases)
    truth = {
        "theta": config.theta.model_dump(),
        "mean": config.mean.model_dump(),
        "platform_biases": {name: {"c2": c2, "c3": c3} for name, (c2, c3) in biases.items()},
        "standardization": standardize(geometry).model_dump() if len(geometry) else None,
        "noise_sd_diff": config.theta.noise_sd_diff,
        "seed": config.seed,
        "n": len(observations),
    }
    logger.info(f"Simulated {len(observations)} observations (seed={config.seed})")
    return observations, truth


# ============================================================================
# Dense oracles
# ============================================================================


def _dense_factor(theta: CovarianceParams, observations: ObservationSet):
    n = len(observations)
    limit = get_settings().dense_max_n
    if n > limit:
        raise ValueError(f"dense likelihood refuses {n} records (limit {limit})")
    try:
        return cho_factor(covariance_matrix(observations, theta), lower=True)
    except LinAlgError as e:
        raise FactorizationError(f"dense covariance of {n} records is not positive definite") from e


def _dense_loglik_from_factor(factor, resid: np.ndarray) -> float:
    L, _ = factor
    quad = float(resid @ cho_solve(factor, resid))
    return -0.5 * (resid.size * LOG_2PI + 2.0 * float(np.sum(np.log(np.diag(L)))) + quad)


def dense_loglik(theta: CovarianceParams, beta, observations: ObservationSet, X: np.ndarray) -> float:
    """Exact Gaussian log-likelihood via a dense Cholesky factor.

    Raises:
        ValueError: If the set exceeds the dense limit
        FactorizationError: If the covariance is not positive definite
    """
    beta = beta.to_vector() if isinstance(beta, MeanParams) else np.asarray(beta, dtype=float)
    factor = _dense_factor(theta, observations)
    return _dense_loglik_from_factor(factor, np.asarray(observations.wind, dtype=float) - X @ beta)


def dense_gls(theta: CovarianceParams, observations: ObservationSet, X: np.ndarray) -> GLSResult:
    """Exact GLS estimate (X' K^-1 X)^-1 X' K^-1 y."""
    factor = _dense_factor(theta, observations)
    y = np.asarray(observations.wind, dtype=float)
    Ki_X = cho_solve(factor, X)
    gram = X.T @ Ki_X
    beta = np.linalg.solve(gram, Ki_X.T @ y)
    return GLSResult(beta=beta, cov_beta=np.linalg.inv(gram), loglik=_dense_loglik_from_factor(factor, y - X @ beta))
