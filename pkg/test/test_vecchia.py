"""Ordering, neighbor selection and the Vecchia likelihood against dense oracles."""

import numpy as np
import pytest
from scipy import stats

from windcal.errors import FactorizationError
from windcal.models.observations import ObservationSet
from windcal.models.params import CovarianceParams, MeanParams
from windcal.services.design import build_design, standardize
from windcal.services.geo import scaled_coordinates
from windcal.services.simulate import dense_gls, dense_loglik, simulate_winds
from windcal.services.vecchia import (
    VecchiaEngine,
    build_plan,
    maxmin_order,
    nearest_neighbors,
    profiled_gls,
    vecchia_loglik,
)

from conftest import random_set


def random_params(rng) -> CovarianceParams:
    return CovarianceParams(
        theta1=rng.uniform(0.5, 5.0),
        theta2=rng.uniform(0.3, 2.0),
        theta3=rng.uniform(200.0, 1500.0),
        theta4=rng.uniform(3600.0, 86400.0),
        nugget=rng.uniform(0.1, 1.0),
    )


def fixture_design(obs):
    return build_design(obs, standardize(obs))


def test_maxmin_single_point():
    obs = random_set(1, 0)
    np.testing.assert_array_equal(maxmin_order(obs, (1.0, 1.0)), [0])


def test_maxmin_collinear_points():
    # Same place, times 0, 1, 2 with unit temporal range: scaled positions 0, 1, 2.
    obs = ObservationSet(time=[0, 1, 2], lon=[0] * 3, lat=[0] * 3, wind=[1] * 3, sensor=[1] * 3, platform=["a"] * 3)
    np.testing.assert_array_equal(maxmin_order(obs, (100.0, 1.0)), [1, 0, 2])


def test_maxmin_is_permutation():
    obs = random_set(500, 500, seed=8)
    order = maxmin_order(obs, (500.0, 43200.0))
    np.testing.assert_array_equal(np.sort(order), np.arange(1000))


def test_neighbors_match_brute_force():
    obs = random_set(100, 100, seed=9)
    scaling = (400.0, 20000.0)
    m = 10
    order = maxmin_order(obs, scaling)
    plan = nearest_neighbors(obs, order, m, scaling)
    coords = scaled_coordinates(obs.lon, obs.lat, obs.time, *scaling)[order]

    assert np.all(plan.neighbors[0] == -1)
    for k in range(1, plan.n):
        d = np.linalg.norm(coords[:k] - coords[k], axis=1)
        expected = np.lexsort((np.arange(k), d))[:m]
        np.testing.assert_array_equal(plan.neighbors[k, : min(m, k)], expected)
        assert plan.neighbor_counts()[k] == min(m, k)


def test_single_record_is_univariate_normal(theta):
    obs = random_set(1, 0)
    X = np.ones((1, 1))
    plan = build_plan(obs, 5, theta.scaling)
    expected = stats.norm.logpdf(obs.wind[0], loc=2.0, scale=np.sqrt(theta.theta1 + theta.nugget))
    assert VecchiaEngine(obs, X, plan).loglik(theta, [2.0]) == pytest.approx(expected, rel=1e-12)


def test_pure_nugget_is_independent_sum():
    obs = random_set(30, 30, seed=10)
    X = fixture_design(obs)
    params = CovarianceParams(theta1=0.0, theta2=0.5, theta3=100.0, theta4=3600.0, nugget=0.7)
    beta = np.array([7.0, 0.1, 0.2, 0.0, 0.0, -0.5, -0.4])
    plan = build_plan(obs, 8, params.scaling)
    expected = np.sum(stats.norm.logpdf(obs.wind, loc=X @ beta, scale=np.sqrt(0.7)))
    assert vecchia_loglik(params, beta, obs, X, plan) == pytest.approx(expected, rel=1e-12)


def test_full_conditioning_equals_dense():
    rng = np.random.default_rng(11)
    for replicate in range(25):
        obs = random_set(100, 100, seed=100 + replicate)
        X = fixture_design(obs)
        params = random_params(rng)
        beta = rng.normal(size=X.shape[1]) + np.array([7.0, 0, 0, 0, 0, 0, 0])
        plan = build_plan(obs, len(obs) - 1, params.scaling)
        vecchia = vecchia_loglik(params, beta, obs, X, plan)
        dense = dense_loglik(params, beta, obs, X)
        assert vecchia == pytest.approx(dense, rel=1e-8)


def test_order_free_when_exact(theta):
    obs = random_set(30, 30, seed=12)
    X = fixture_design(obs)
    beta = np.full(7, 0.5)
    perm = np.random.default_rng(0).permutation(len(obs))
    shuffled = obs.take(perm)
    a = vecchia_loglik(theta, beta, obs, X, build_plan(obs, 59, theta.scaling))
    b = vecchia_loglik(theta, beta, shuffled, X[perm], build_plan(shuffled, 59, theta.scaling))
    assert a == pytest.approx(b, rel=1e-10)


def test_profiled_gls_matches_dense_gls():
    rng = np.random.default_rng(13)
    obs = random_set(75, 75, seed=13)
    X = fixture_design(obs)
    params = random_params(rng)
    plan = build_plan(obs, len(obs) - 1, params.scaling)
    vecchia = profiled_gls(params, obs, X, plan)
    dense = dense_gls(params, obs, X)
    np.testing.assert_allclose(vecchia.beta, dense.beta, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(vecchia.cov_beta, dense.cov_beta, rtol=1e-7, atol=1e-12)
    assert vecchia.loglik == pytest.approx(dense.loglik, rel=1e-8)


def test_identity_covariance_gives_ols():
    obs = random_set(50, 50, seed=14)
    X = fixture_design(obs)
    params = CovarianceParams(theta1=0.0, theta2=1.0, theta3=50.0, theta4=600.0, nugget=1.0)
    gls = profiled_gls(params, obs, X, build_plan(obs, 10, params.scaling))
    ols, *_ = np.linalg.lstsq(X, obs.wind, rcond=None)
    np.testing.assert_allclose(gls.beta, ols, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(gls.cov_beta, np.linalg.inv(X.T @ X), rtol=1e-9, atol=1e-12)


def test_gls_beta_maximizes_loglik(theta):
    obs = random_set(60, 60, seed=15)
    X = fixture_design(obs)
    engine = VecchiaEngine(obs, X, build_plan(obs, 10, theta.scaling))
    gls = engine.gls(theta)
    for k in range(X.shape[1]):
        for eps in (-1e-3, 1e-3):
            beta = gls.beta.copy()
            beta[k] += eps
            assert engine.loglik(theta, beta) <= gls.loglik


def test_thread_count_does_not_change_result(theta):
    obs = random_set(150, 150, seed=16)
    X = fixture_design(obs)
    plan = build_plan(obs, 12, theta.scaling)
    single = VecchiaEngine(obs, X, plan, block_size=32, threads=1).gls(theta)
    pooled = VecchiaEngine(obs, X, plan, block_size=32, threads=4).gls(theta)
    assert single.loglik == pooled.loglik
    np.testing.assert_array_equal(single.beta, pooled.beta)


def test_factorization_failure_names_ordered_index():
    obs = ObservationSet(time=[0, 0], lon=[1, 1], lat=[2, 2], wind=[5, 6], sensor=[1, 2], platform=["j", "c"])
    params = CovarianceParams(theta1=1.0, theta2=0.5, theta3=100.0, theta4=3600.0, nugget=1e-300)
    plan = build_plan(obs, 1, params.scaling)
    with pytest.raises(FactorizationError) as info:
        VecchiaEngine(obs, np.ones((2, 1)), plan).loglik(params, [0.0])
    assert info.value.index == 1
    assert "ordered point 1" in info.value.message


@pytest.mark.slow
def test_more_neighbors_approximate_better():
    obs = random_set(1000, 1000, seed=17, span_deg=20.0)
    params = CovarianceParams(theta1=4.0, theta2=0.5, theta3=800.0, theta4=86400.0, nugget=0.28125)
    obs = simulate_winds(obs, params, MeanParams(b0=8.0, c2=-0.8, c3=-0.9), seed=3)
    X = fixture_design(obs)
    beta = np.linalg.lstsq(X, obs.wind, rcond=None)[0]
    dense = dense_loglik(params, beta, obs, X)
    err = {m: abs(vecchia_loglik(params, beta, obs, X, build_plan(obs, m, params.scaling)) - dense) for m in (5, 30)}
    assert err[30] < err[5]
