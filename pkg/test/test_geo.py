"""Spherical distances and the scaled metric."""

import numpy as np
import pytest

from windcal.models.observations import SpaceTimePoint
from windcal.services.geo import (
    EARTH_RADIUS_KM,
    chordal_distance,
    great_circle_distance,
    max_chordal_extent,
    scaled_coordinates,
    scaled_distance,
)


def test_antipodal_chord_is_diameter():
    p = SpaceTimePoint(lon=0.0, lat=0.0)
    q = SpaceTimePoint(lon=180.0, lat=0.0)
    assert chordal_distance(p, q) == pytest.approx(2 * EARTH_RADIUS_KM)
    assert great_circle_distance(p, q) == pytest.approx(np.pi * EARTH_RADIUS_KM)


def test_chord_symmetric_and_below_arc():
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = SpaceTimePoint(lon=rng.uniform(-180, 180), lat=rng.uniform(-90, 90))
        q = SpaceTimePoint(lon=rng.uniform(-180, 180), lat=rng.uniform(-90, 90))
        chord = chordal_distance(p, q)
        assert chord == pytest.approx(chordal_distance(q, p))
        assert 0.0 <= chord <= great_circle_distance(p, q) + 1e-9


def test_longitude_wrap_is_same_place():
    assert chordal_distance(SpaceTimePoint(lon=-180.0, lat=10.0), SpaceTimePoint(lon=180.0, lat=10.0)) < 1e-9


def test_scaled_distance_combines_space_and_time():
    p = SpaceTimePoint(lon=0.0, lat=0.0, time=0.0)
    q = SpaceTimePoint(lon=0.0, lat=0.0, time=3600.0)
    assert scaled_distance(p, q, 100.0, 3600.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        scaled_distance(p, q, 0.0, 3600.0)
    with pytest.raises(ValueError):
        scaled_distance(p, q, 100.0, -1.0)


def test_scaled_coordinates_reproduce_scaled_distance():
    rng = np.random.default_rng(1)
    lon, lat, time = rng.uniform(-50, 50, 6), rng.uniform(-40, 40, 6), rng.uniform(0, 1e5, 6)
    coords = scaled_coordinates(lon, lat, time, 250.0, 7200.0)
    for i in range(6):
        for j in range(6):
            p = SpaceTimePoint(lon=lon[i], lat=lat[i], time=time[i])
            q = SpaceTimePoint(lon=lon[j], lat=lat[j], time=time[j])
            assert np.linalg.norm(coords[i] - coords[j]) == pytest.approx(scaled_distance(p, q, 250.0, 7200.0))


def test_max_chordal_extent_matches_brute_force():
    rng = np.random.default_rng(2)
    lon, lat = rng.uniform(-30, 30, 200), rng.uniform(-20, 20, 200)
    points = [SpaceTimePoint(lon=a, lat=b) for a, b in zip(lon, lat)]
    brute = max(chordal_distance(p, q) for p in points for q in points)
    assert max_chordal_extent(lon, lat) == pytest.approx(brute)
    assert max_chordal_extent([5.0, 5.0], [1.0, 1.0]) == 0.0
