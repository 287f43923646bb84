"""Shared fixtures for the windcal test-suite."""

import numpy as np
import pytest

from windcal.config import reset_settings
from windcal.models.observations import ObservationSet, Sensor
from windcal.models.params import CovarianceParams, MeanParams
from windcal.models.schemas import SimConfig, TrackSpec


@pytest.fixture(autouse=True)
def fresh_settings():
    reset_settings()
    yield
    reset_settings()


def random_set(n_ref: int, n_cyg: int, seed: int = 0, span_deg: float = 10.0, span_s: float = 86400.0):
    """Scattered records: reference first, then alternating starboard/port."""
    rng = np.random.default_rng(seed)
    n = n_ref + n_cyg
    sensor = np.concatenate([np.full(n_ref, int(Sensor.REFERENCE)), np.where(np.arange(n_cyg) % 2 == 0, 2, 3)])
    platform = np.array(["jas3"] * n_ref + ["cyg01"] * n_cyg, dtype=object)
    return ObservationSet(
        time=rng.uniform(0.0, span_s, n),
        lon=rng.uniform(-span_deg, span_deg, n),
        lat=rng.uniform(-span_deg, span_deg, n),
        wind=rng.uniform(3.0, 12.0, n),
        sensor=sensor,
        platform=platform,
    )


@pytest.fixture
def small_set():
    return random_set(40, 40, seed=1)


@pytest.fixture
def theta():
    return CovarianceParams(theta1=4.0, theta2=0.5, theta3=300.0, theta4=43200.0, nugget=0.28125)


def sim_config(**overrides) -> SimConfig:
    """Two CYGNSS platforms crossing one reference track."""
    values = dict(
        start_time=0.0,
        duration_s=86400.0,
        cadence_s=600.0,
        platforms=[
            TrackSpec(name="jas3", role="reference", lat_band_deg=66.0, period_s=6745.0, lon_rate_deg_s=-0.05),
            TrackSpec(name="cyg01", role="cygnss", period_s=5700.0, lon0_deg=10.0, starboard_bias=-0.8),
            TrackSpec(name="cyg02", role="cygnss", period_s=5700.0, lon0_deg=-30.0, phase_rad=1.0, port_bias=-1.1),
        ],
        theta=CovarianceParams(theta1=4.0, theta2=0.5, theta3=500.0, theta4=86400.0, nugget=0.28125),
        mean=MeanParams(b0=8.0, b2=0.3, c2=-0.83, c3=-0.94),
        seed=7,
    )
    values.update(overrides)
    return SimConfig(**values)
