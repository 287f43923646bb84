"""Standardization, design matrix and rank checks."""

import numpy as np
import pytest

from windcal.errors import IdentifiabilityError, RankDeficiencyError
from windcal.models.observations import ObservationSet
from windcal.services.design import DESIGN_COLUMNS, build_design, check_rank, standardize

from conftest import random_set


def test_standardize_uses_sample_sd():
    obs = random_set(10, 10, seed=5)
    std = standardize(obs)
    assert std.time_center == pytest.approx(np.mean(obs.time))
    assert std.time_scale == pytest.approx(np.std(obs.time, ddof=1))
    assert std.lat_scale == pytest.approx(np.std(obs.lat, ddof=1))


def test_standardize_degenerate_scale_is_one():
    obs = ObservationSet(time=[5.0, 5.0], lon=[0, 1], lat=[3, 3], wind=[1, 2], sensor=[1, 2], platform=["a", "b"])
    std = standardize(obs)
    assert std.time_scale == 1.0
    assert std.lat_scale == 1.0
    single = obs.take([0])
    assert standardize(single).time_scale == 1.0


def test_design_columns():
    obs = random_set(6, 6, seed=6)
    X = build_design(obs, standardize(obs))
    assert X.shape == (12, len(DESIGN_COLUMNS))
    np.testing.assert_array_equal(X[:, 0], 1.0)
    np.testing.assert_allclose(X[:, 3], X[:, 2] ** 2)
    np.testing.assert_allclose(X[:, 4], X[:, 2] ** 3)
    np.testing.assert_array_equal(X[:, 5], (obs.sensor == 2).astype(float))
    np.testing.assert_array_equal(X[:, 6], (obs.sensor == 3).astype(float))
    assert np.mean(X[:, 1]) == pytest.approx(0.0, abs=1e-12)


def test_missing_groups_are_named():
    obs = random_set(10, 10)
    with pytest.raises(IdentifiabilityError, match="reference"):
        build_design(obs.take(obs.sensor != 1), standardize(obs))
    with pytest.raises(IdentifiabilityError, match="CYGNSS"):
        build_design(obs.take(obs.sensor == 1), standardize(obs))


def test_rank_deficiency_names_port_column():
    obs = random_set(10, 10)
    no_port = obs.take(obs.sensor != 3)
    X = build_design(no_port, standardize(no_port))
    with pytest.raises(RankDeficiencyError) as info:
        check_rank(X)
    assert info.value.columns == ["port"]


def test_full_rank_passes():
    obs = random_set(20, 20)
    check_rank(build_design(obs, standardize(obs)))
