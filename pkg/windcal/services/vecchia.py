"""Vecchia-approximated Gaussian likelihood and profiled GLS.

The joint density of the ordered records is approximated by the product of
the conditionals p(y_k | y_N(k)) where N(k) holds at most ``m`` earlier
ordered records nearest to k. Every conditional comes from a small dense
Cholesky factor; stacking the last rows of the inverse factors gives the
whitening map used both for the log-likelihood and for GLS.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import qr, solve_triangular
from scipy.spatial.distance import cdist

from windcal.config import get_settings
from windcal.errors import FactorizationError
from windcal.models.observations import ObservationSet
from windcal.models.params import CovarianceParams, MeanParams, NeighborPlan
from windcal.services.covariance import matern
from windcal.services.design import DESIGN_COLUMNS, check_rank
from windcal.services.geo import scaled_coordinates, to_cartesian

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))


# ============================================================================
# Ordering and conditioning sets
# ============================================================================


def maxmin_order(observations: ObservationSet, scaling: tuple[float, float]) -> np.ndarray:
    """Greedy maxmin ordering in the scaled space-time metric.

    Starts from the record nearest the scaled centroid, then repeatedly picks
    the record farthest from everything picked so far. Ties go to the lowest
    original index.

    Returns:
        Permutation of 0..n-1 (original indices in ordered sequence)
    """
    n = len(observations)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    coords = scaled_coordinates(observations.lon, observations.lat, observations.time, *scaling)
    centroid = coords.mean(axis=0)
    first = int(np.argmin(np.sum((coords - centroid) ** 2, axis=1)))

    order = np.empty(n, dtype=np.int64)
    order[0] = first
    min_sq = np.sum((coords - coords[first]) ** 2, axis=1)
    min_sq[first] = -np.inf
    for k in range(1, n):
        nxt = int(np.argmax(min_sq))
        order[k] = nxt
        # Picked records stay at -inf through the minimum.
        np.minimum(min_sq, np.sum((coords - coords[nxt]) ** 2, axis=1), out=min_sq)
        min_sq[nxt] = -np.inf
    return order


def nearest_neighbors(
    observations: ObservationSet,
    order: np.ndarray,
    m: int,
    scaling: tuple[float, float],
    block: int = 512,
) -> NeighborPlan:
    """Exact m-nearest earlier neighbors for every ordered record.

    Distances come from blocked dense scans; ties are resolved by lowest
    ordered position.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    order = np.asarray(order, dtype=np.int64)
    n = order.shape[0]
    coords = scaled_coordinates(observations.lon, observations.lat, observations.time, *scaling)[order]
    neighbors = np.full((n, m), -1, dtype=np.int64)

    for start in range(1, n, block):
        stop = min(n, start + block)
        D = cdist(coords[start:stop], coords[:stop])
        for row, k in enumerate(range(start, stop)):
            d = D[row, :k]
            if k <= m:
                candidates = np.arange(k)
            else:
                kth = np.partition(d, m - 1)[m - 1]
                candidates = np.flatnonzero(d <= kth)
            chosen = candidates[np.lexsort((candidates, d[candidates]))][:m]
            neighbors[k, : chosen.size] = chosen

    return NeighborPlan(order=order, neighbors=neighbors, m=m, scaling=(float(scaling[0]), float(scaling[1])))


def build_plan(observations: ObservationSet, m: int, scaling: tuple[float, float]) -> NeighborPlan:
    """Maxmin ordering followed by exact neighbor selection."""
    order = maxmin_order(observations, scaling)
    plan = nearest_neighbors(observations, order, m, scaling)
    logger.debug(f"Built Vecchia plan: n={plan.n}, m={m}, scaling={scaling}")
    return plan


# ============================================================================
# Whitening engine
# ============================================================================


@dataclass(frozen=True)
class Whitened:
    """Vecchia-whitened response and design in ordered sequence."""

    w_y: np.ndarray
    W_X: np.ndarray
    log_sd: np.ndarray  # log conditional standard deviations


@dataclass(frozen=True)
class GLSResult:
    """Profiled GLS estimate for fixed covariance parameters."""

    beta: np.ndarray
    cov_beta: np.ndarray
    loglik: float

    @property
    def mean_params(self) -> MeanParams:
        return MeanParams.from_vector(self.beta)


class VecchiaEngine:
    """Evaluates the Vecchia likelihood for one data set and one plan.

    Ordered responses, design rows and unscaled coordinates are cached, so
    each evaluation only rebuilds the small per-record covariance blocks.
    """

    def __init__(
        self,
        observations: ObservationSet,
        X: np.ndarray,
        plan: NeighborPlan,
        block_size: Optional[int] = None,
        threads: Optional[int] = None,
    ):
        X = np.asarray(X, dtype=float)
        if X.shape[0] != len(observations) or plan.n != len(observations):
            raise ValueError(f"design ({X.shape[0]} rows) and plan ({plan.n}) must match the set ({len(observations)})")
        settings = get_settings()
        self.plan = plan
        self.block_size = block_size or settings.block_size
        self.threads = threads or settings.threads
        order = plan.order
        self.y = np.asarray(observations.wind, dtype=float)[order]
        self.X = X[order]
        self.xyz = to_cartesian(observations.lon, observations.lat)[order]
        self.time = np.asarray(observations.time, dtype=float)[order]

        # Gather indices: conditioning set first, the record itself last.
        m = plan.m
        n = plan.n
        self.index = np.empty((n, m + 1), dtype=np.int64)
        self.index[:, :m] = plan.neighbors
        self.index[:, m] = np.arange(n)
        self.pad = self.index < 0
        self.safe_index = np.where(self.pad, 0, self.index)

    @property
    def n(self) -> int:
        return self.plan.n

    def _blocks(self) -> list[tuple[int, int]]:
        return [(s, min(self.n, s + self.block_size)) for s in range(0, self.n, self.block_size)]

    def _whiten_block(self, params: CovarianceParams, start: int, stop: int) -> tuple:
        idx = self.safe_index[start:stop]
        pad = self.pad[start:stop]
        coords = np.concatenate(
            [self.xyz[idx] / params.theta3, (self.time[idx] / params.theta4)[..., None]], axis=-1
        )
        diff = coords[:, :, None, :] - coords[:, None, :, :]
        d = np.sqrt(np.sum(diff**2, axis=-1))
        K = params.theta1 * matern(d, params.theta2)
        size = K.shape[-1]
        K[:, np.arange(size), np.arange(size)] += params.nugget

        # Padding slots become independent unit-variance dummies with zero data.
        K = np.where(pad[:, :, None] | pad[:, None, :], 0.0, K)
        K[:, np.arange(size), np.arange(size)] = np.where(pad, 1.0, K[:, np.arange(size), np.arange(size)])

        try:
            L = np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            for row in range(K.shape[0]):
                try:
                    np.linalg.cholesky(K[row])
                except np.linalg.LinAlgError:
                    k = start + row
                    raise FactorizationError(
                        f"covariance of ordered point {k} (record {int(self.plan.order[k])}) "
                        f"is not positive definite",
                        index=k,
                    ) from None
            raise

        # Last row of L^-1 solves L' r = e_last.
        e_last = np.zeros((K.shape[0], size, 1))
        e_last[:, -1, 0] = 1.0
        r = np.linalg.solve(np.swapaxes(L, -1, -2), e_last)[..., 0]
        r = np.where(pad, 0.0, r)

        y = np.where(pad, 0.0, self.y[idx])
        Xb = np.where(pad[..., None], 0.0, self.X[idx])
        w_y = np.einsum("bk,bk->b", r, y)
        W_X = np.einsum("bk,bkp->bp", r, Xb)
        log_sd = np.log(L[:, -1, -1])
        return w_y, W_X, log_sd

    def whiten(self, params: CovarianceParams) -> Whitened:
        """Whitened response, design and conditional log-sds in ordered sequence.

        Blocks may run on a thread pool; they are reassembled in block order.

        Raises:
            FactorizationError: If a conditioning covariance is not positive definite
        """
        blocks = self._blocks()
        if self.threads > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                parts = list(pool.map(lambda b: self._whiten_block(params, *b), blocks))
        else:
            parts = [self._whiten_block(params, *b) for b in blocks]
        return Whitened(
            w_y=np.concatenate([p[0] for p in parts]),
            W_X=np.concatenate([p[1] for p in parts]),
            log_sd=np.concatenate([p[2] for p in parts]),
        )

    @staticmethod
    def _loglik(white: Whitened, beta: np.ndarray) -> float:
        resid = white.w_y - white.W_X @ beta
        return float(-0.5 * (white.log_sd.size * LOG_2PI + 2.0 * np.sum(white.log_sd) + np.sum(resid**2)))

    def loglik(self, params: CovarianceParams, beta) -> float:
        """Vecchia log-likelihood at (params, beta)."""
        beta = beta.to_vector() if isinstance(beta, MeanParams) else np.asarray(beta, dtype=float)
        return self._loglik(self.whiten(params), beta)

    def gls(self, params: CovarianceParams) -> GLSResult:
        """Profiled GLS: beta minimizing the whitened residual norm.

        Raises:
            RankDeficiencyError: If the whitened design is rank deficient
        """
        white = self.whiten(params)
        check_rank(white.W_X, DESIGN_COLUMNS[: white.W_X.shape[1]])
        Q, R = qr(white.W_X, mode="economic")
        beta = solve_triangular(R, Q.T @ white.w_y)
        R_inv = solve_triangular(R, np.eye(R.shape[0]))
        cov_beta = R_inv @ R_inv.T
        return GLSResult(beta=beta, cov_beta=cov_beta, loglik=self._loglik(white, beta))


def vecchia_loglik(
    theta: CovarianceParams, beta, observations: ObservationSet, X: np.ndarray, plan: NeighborPlan
) -> float:
    """Vecchia log-likelihood of the winds under mean X beta and covariance theta."""
    return VecchiaEngine(observations, X, plan).loglik(theta, beta)


def profiled_gls(theta: CovarianceParams, observations: ObservationSet, X: np.ndarray, plan: NeighborPlan) -> GLSResult:
    """GLS estimate, its covariance and the log-likelihood at the estimate."""
    return VecchiaEngine(observations, X, plan).gls(theta)
