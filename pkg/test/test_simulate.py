"""Synthetic tracks, winds and the dense oracles."""

import json

import numpy as np
import pytest
from scipy import stats

from windcal.config import reset_settings
from windcal.errors import ConfigError
from windcal.models.observations import ObservationSet, Sensor
from windcal.models.params import CovarianceParams, MeanParams
from windcal.models.schemas import TrackSpec
from windcal.services.design import build_design, standardize
from windcal.services.geo import to_cartesian
from windcal.services.simulate import (
    dense_loglik,
    load_sim_config,
    platform_distance_series,
    replicate_seeds,
    simulate,
    simulate_tracks,
    simulate_winds,
)

from conftest import random_set, sim_config

NOISE_ONLY = CovarianceParams(theta1=0.0, theta2=0.5, theta3=100.0, theta4=3600.0, nugget=1.0)


def test_track_counts_and_band():
    config = sim_config(cadence_s=60.0)
    geometry = simulate_tracks(config)
    counts = {(p, s): int(np.sum((geometry.platform == p) & (geometry.sensor == s))) for p, s in
              [("jas3", 1), ("cyg01", 2), ("cyg01", 3), ("cyg02", 2), ("cyg02", 3)]}
    assert set(counts.values()) == {1440}
    cyg = geometry.sensor != Sensor.REFERENCE
    assert np.all(np.abs(geometry.lat[cyg]) <= 38.0)
    assert len(geometry) == 5 * 1440


def test_thinning_and_determinism():
    config = sim_config(n_per_platform=100)
    a = simulate_tracks(config)
    b = simulate_tracks(config)
    assert a.same_records(b)
    assert int(np.sum(a.platform == "jas3")) == 100


def test_zero_offset_makes_antennas_coincide():
    track = TrackSpec(name="cyg05", role="cygnss", cross_track_offset_km=0.0)
    geometry = simulate_tracks(sim_config(platforms=[track]))
    star = geometry.take(geometry.sensor == Sensor.STARBOARD)
    port = geometry.take(geometry.sensor == Sensor.PORT)
    np.testing.assert_array_equal(star.lon, port.lon)
    np.testing.assert_array_equal(star.lat, port.lat)


def test_offset_separates_antennas():
    geometry = simulate_tracks(sim_config())
    star = geometry.take((geometry.sensor == Sensor.STARBOARD) & (geometry.platform == "cyg01"))
    port = geometry.take((geometry.sensor == Sensor.PORT) & (geometry.platform == "cyg01"))
    inside = np.abs(star.lat) < 30.0
    sep = np.linalg.norm(to_cartesian(star.lon, star.lat) - to_cartesian(port.lon, port.lat), axis=1)
    np.testing.assert_allclose(sep[inside], 50.0, rtol=0.05)


def test_pure_noise_residual_variance():
    geometry = random_set(5000, 5000, seed=30)
    obs = simulate_winds(geometry, NOISE_ONLY, MeanParams(b0=20.0), seed=30)
    resid = obs.wind - 20.0
    assert np.var(resid, ddof=1) == pytest.approx(1.0, rel=0.05)
    assert obs.provenance["clipped_negative"] == 0


def test_coincident_antennas_differ_by_contrast_without_noise():
    geometry = ObservationSet(
        time=[0.0, 0.0, 50.0], lon=[3.0, 3.0, 4.0], lat=[1.0, 1.0, 1.0], wind=[0, 0, 0],
        sensor=[2, 3, 1], platform=["cyg01", "cyg01", "jas3"],
    )
    theta = CovarianceParams(theta1=2.0, theta2=0.5, theta3=100.0, theta4=3600.0, nugget=1e-14)
    obs = simulate_winds(geometry, theta, MeanParams(b0=10.0, c2=-0.83, c3=-0.94), seed=1)
    assert obs.wind[0] - obs.wind[1] == pytest.approx(-0.83 + 0.94, abs=1e-5)
    assert obs.provenance["unique_points"] == 2


def test_platform_bias_overrides():
    geometry = random_set(0, 20, seed=31)
    obs = simulate_winds(geometry, NOISE_ONLY.model_copy(update={"nugget": 1e-12}), MeanParams(b0=10.0), seed=2,
                         platform_biases={"cyg01": (0.5, -0.5)})
    np.testing.assert_allclose(obs.wind[geometry.sensor == 2], 10.5, atol=1e-4)
    np.testing.assert_allclose(obs.wind[geometry.sensor == 3], 9.5, atol=1e-4)


def test_same_seed_same_winds(theta):
    geometry = random_set(50, 50, seed=32)
    a = simulate_winds(geometry, theta, MeanParams(b0=8.0), seed=5)
    b = simulate_winds(geometry, theta, MeanParams(b0=8.0), seed=5)
    c = simulate_winds(geometry, theta, MeanParams(b0=8.0), seed=6)
    np.testing.assert_array_equal(a.wind, b.wind)
    assert not np.array_equal(a.wind, c.wind)


def test_simulation_size_guard(monkeypatch, theta):
    monkeypatch.setenv("WINDCAL_SIMULATE_MAX_N", "10")
    reset_settings()
    with pytest.raises(ValueError, match="limit 10"):
        simulate_winds(random_set(6, 6), theta, MeanParams(), seed=0)


def test_simulate_truth_document():
    obs, truth = simulate(sim_config())
    assert truth["n"] == len(obs)
    assert truth["platform_biases"]["cyg01"] == {"c2": -0.8, "c3": -0.94}
    assert truth["platform_biases"]["cyg02"] == {"c2": -0.83, "c3": -1.1}
    assert truth["noise_sd_diff"] == pytest.approx(0.75)
    json.dumps(truth)


def test_dense_loglik_diagonal_case():
    obs = random_set(20, 20, seed=33)
    X = build_design(obs, standardize(obs))
    beta = np.array([7.0, 0, 0, 0, 0, -0.5, -0.5])
    params = NOISE_ONLY.model_copy(update={"nugget": 2.0})
    expected = np.sum(stats.norm.logpdf(obs.wind, loc=X @ beta, scale=np.sqrt(2.0)))
    assert dense_loglik(params, beta, obs, X) == pytest.approx(expected, rel=1e-12)


def test_dense_loglik_permutation_invariant(theta):
    obs = random_set(30, 30, seed=34)
    X = build_design(obs, standardize(obs))
    beta = np.full(7, 0.3)
    perm = np.random.default_rng(2).permutation(60)
    a = dense_loglik(theta, beta, obs, X)
    b = dense_loglik(theta, beta, obs.take(perm), X[perm])
    assert a == pytest.approx(b, rel=1e-10)


def test_replicate_seeds():
    seeds = replicate_seeds(42, 20)
    assert seeds == replicate_seeds(42, 20)
    assert len(set(seeds)) == 20
    assert replicate_seeds(43, 20) != seeds


def test_platform_distance_series():
    config = sim_config()
    frame = platform_distance_series(config, step_s=3600.0)
    assert list(frame.columns) == ["time_s", "platform_a", "platform_b", "distance_km"]
    assert len(frame) == 3 * 24
    assert frame["distance_km"].between(0.0, 12742.0).all()


def test_load_sim_config(tmp_path):
    with pytest.raises(ConfigError, match="missing.json"):
        load_sim_config(tmp_path / "missing.json")
    path = tmp_path / "sim.json"
    path.write_text(sim_config().model_dump_json())
    assert load_sim_config(path) == sim_config()
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_sim_config(path)


@pytest.mark.slow
def test_anomaly_correlation_at_unit_distance():
    # Two records one temporal range apart: correlation exp(-1) for nu = 1/2.
    geometry = ObservationSet(time=[0.0, 3600.0], lon=[0, 0], lat=[0, 0], wind=[0, 0], sensor=[1, 1],
                              platform=["a", "a"])
    theta = CovarianceParams(theta1=1.0, theta2=0.5, theta3=100.0, theta4=3600.0, nugget=1e-10)
    draws = np.array([simulate_winds(geometry, theta, MeanParams(b0=50.0), seed=s).wind
                      for s in replicate_seeds(0, 500)])
    r = np.corrcoef(draws[:, 0], draws[:, 1])[0, 1]
    assert r == pytest.approx(np.exp(-1.0), abs=0.1)
