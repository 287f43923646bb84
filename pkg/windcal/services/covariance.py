"""Matern correlation and the observation covariance."""

import logging

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gammaln, kv, kve

from windcal.models.observations import Observation, ObservationSet
from windcal.models.params import CovarianceParams
from windcal.services.geo import scaled_coordinates, scaled_distance

logger = logging.getLogger(__name__)


def bessel_k(nu: float, x: float) -> float:
    """Modified Bessel function of the second kind K_nu(x).

    Raises:
        ValueError: If x is not positive
    """
    if not x > 0.0:
        raise ValueError(f"bessel_k requires x > 0, got {x}")
    return float(kv(abs(nu), x))


def matern(d, nu: float):
    """Unit-variance Matern correlation 2^(1-nu)/Gamma(nu) d^nu K_nu(d).

    Evaluated in log space with the exponentially scaled Bessel function so
    that neither d^nu nor K_nu(d) over- or underflows; exactly 1 at d = 0.

    Args:
        d: Scaled distance(s), non-negative
        nu: Smoothness, positive

    Returns:
        Correlation(s) in (0, 1], same shape as d
    """
    d = np.asarray(d, dtype=float)
    out = np.ones_like(d)
    positive = d > 0.0
    if np.any(positive):
        dp = d[positive]
        log_scale = (1.0 - nu) * np.log(2.0) - gammaln(nu)
        with np.errstate(divide="ignore"):
            log_value = log_scale + nu * np.log(dp) + np.log(kve(nu, dp)) - dp
        out[positive] = np.minimum(np.exp(log_value), 1.0)
    return out if out.ndim else float(out)


def correlation_covariance(d, params: CovarianceParams):
    """theta1 * Matern(d; theta2), no nugget."""
    return params.theta1 * matern(d, params.theta2)


def cross_covariance(i: Observation, j: Observation, params: CovarianceParams) -> float:
    """Covariance between two records.

    The nugget attaches to record identity: it is added only when ``i`` and
    ``j`` are the same object, never for distinct records that coincide.
    """
    d = scaled_distance(i.point, j.point, params.theta3, params.theta4)
    value = params.theta1 * matern(d, params.theta2)
    if i is j:
        value += params.nugget
    return float(value)


def covariance_matrix(observations: ObservationSet, params: CovarianceParams) -> np.ndarray:
    """Dense covariance of all records, nugget on the diagonal."""
    coords = scaled_coordinates(observations.lon, observations.lat, observations.time, params.theta3, params.theta4)
    K = correlation_covariance(cdist(coords, coords), params)
    K[np.diag_indices_from(K)] += params.nugget
    return K
