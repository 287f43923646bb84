"""Matern kernel and covariance assembly."""

import numpy as np
import pytest

from windcal.models.observations import Observation, ObservationSet
from windcal.models.params import CovarianceParams
from windcal.services.covariance import bessel_k, covariance_matrix, cross_covariance, matern

from conftest import random_set

GRID = np.linspace(1e-6, 30.0, 1000)


def test_half_integer_closed_forms():
    np.testing.assert_allclose(matern(GRID, 0.5), np.exp(-GRID), rtol=1e-10)
    np.testing.assert_allclose(matern(GRID, 1.5), (1.0 + GRID) * np.exp(-GRID), rtol=1e-10)
    np.testing.assert_allclose(
        matern(GRID, 2.5), (1.0 + GRID + GRID**2 / 3.0) * np.exp(-GRID), rtol=1e-10
    )


def test_bessel_k_values():
    assert bessel_k(0.5, 1.0) == pytest.approx(np.sqrt(np.pi / 2.0) * np.exp(-1.0), abs=1e-12)
    assert bessel_k(0.5, 1.0) == pytest.approx(0.461068, abs=1e-6)
    assert bessel_k(1.0, 1.0) == pytest.approx(0.601907, abs=1e-6)
    assert bessel_k(-1.3, 2.0) == bessel_k(1.3, 2.0)
    with pytest.raises(ValueError):
        bessel_k(1.0, 0.0)
    with pytest.raises(ValueError):
        bessel_k(1.0, -2.0)


@pytest.mark.parametrize("nu", [0.1, 0.5, 1.3, 4.0])
def test_matern_unit_at_zero_and_non_increasing(nu):
    assert matern(0.0, nu) == 1.0
    values = matern(np.linspace(0.0, 40.0, 400), nu)
    assert np.all(np.diff(values) <= 1e-15)
    assert np.all(values > 0.0)


def test_nugget_attaches_to_record_identity(theta):
    a = Observation(time=0.0, lon=0.0, lat=0.0, wind=5.0, sensor=2, platform="cyg01")
    b = Observation(time=0.0, lon=0.0, lat=0.0, wind=6.0, sensor=3, platform="cyg01")
    assert cross_covariance(a, a, theta) == pytest.approx(theta.theta1 + theta.nugget)
    assert cross_covariance(a, b, theta) == pytest.approx(theta.theta1)


def test_covariance_matrix_symmetric_positive_definite(theta):
    obs = random_set(20, 20, seed=4)
    K = covariance_matrix(obs, theta)
    assert K.shape == (40, 40)
    np.testing.assert_allclose(K, K.T)
    np.testing.assert_allclose(np.diag(K), theta.theta1 + theta.nugget)
    assert np.all(np.linalg.eigvalsh(K) > 0.0)


def test_coincident_records_share_anomaly_covariance(theta):
    obs = ObservationSet(time=[0, 0], lon=[1, 1], lat=[2, 2], wind=[5, 6], sensor=[2, 3], platform=["c", "c"])
    K = covariance_matrix(obs, theta)
    assert K[0, 1] == pytest.approx(theta.theta1)
    assert K[0, 0] == pytest.approx(theta.theta1 + theta.nugget)


def test_pure_noise_limit():
    params = CovarianceParams(theta1=0.0, theta2=0.5, theta3=1.0, theta4=1.0, nugget=2.0)
    K = covariance_matrix(random_set(5, 5), params)
    np.testing.assert_allclose(K, 2.0 * np.eye(10))
