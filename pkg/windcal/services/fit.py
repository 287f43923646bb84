"""Maximum-likelihood fitting of the space-time model.

Covariance parameters are estimated by L-BFGS-B on the profiled Vecchia
likelihood in transformed coordinates; the mean and contrast coefficients
come from GLS at every evaluation. Standard errors for the covariance
parameters use a finite-difference Hessian and the delta method.
"""

import logging
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree
from scipy.special import expit, logit

from windcal.errors import (
    DegenerateResponseError,
    FactorizationError,
    InsufficientDataError,
)
from windcal.models.observations import ObservationSet
from windcal.models.params import CovarianceParams, MeanParams
from windcal.models.schemas import BiasEstimates, FitConfig, FitResult
from windcal.services.covariance import matern
from windcal.services.design import build_design, check_rank, standardize
from windcal.services.geo import max_chordal_extent, scaled_coordinates
from windcal.services.vecchia import GLSResult, VecchiaEngine, build_plan

logger = logging.getLogger(__name__)

PENALTY = 1e10
THETA_NAMES = ("theta1", "theta2", "theta3", "theta4", "nugget")
START_TIME_RANGE_S = 86400.0
# Median nearest-record correlation below which the anomaly is white noise.
COLLAPSE_CORRELATION = 0.05
CONTRAST_SLICE = slice(5, 7)


# ============================================================================
# Finite differences
# ============================================================================


def finite_difference_gradient(f: Callable[[np.ndarray], float], x, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        grad[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return grad


def finite_difference_hessian(f: Callable[[np.ndarray], float], x, step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian of a scalar function (symmetric by construction)."""
    x = np.asarray(x, dtype=float)
    k = x.size
    f0 = f(x)
    H = np.empty((k, k))
    basis = np.eye(k) * step
    for i in range(k):
        H[i, i] = (f(x + basis[i]) - 2.0 * f0 + f(x - basis[i])) / step**2
        for j in range(i):
            value = (
                f(x + basis[i] + basis[j])
                - f(x + basis[i] - basis[j])
                - f(x - basis[i] + basis[j])
                + f(x - basis[i] - basis[j])
            ) / (4.0 * step**2)
            H[i, j] = H[j, i] = value
    return H


# ============================================================================
# Parameter transform
# ============================================================================


class ParameterTransform:
    """Maps covariance parameters to unconstrained optimizer coordinates.

    Variances and ranges are logged; the smoothness is a logit inside its box
    and drops out entirely when held fixed.
    """

    def __init__(self, bounds: tuple[float, float], fixed_smoothness: Optional[float] = None):
        self.lo, self.hi = bounds
        self.fixed_smoothness = fixed_smoothness

    @property
    def names(self) -> tuple[str, ...]:
        if self.fixed_smoothness is None:
            return THETA_NAMES
        return tuple(name for name in THETA_NAMES if name != "theta2")

    def to_unconstrained(self, params: CovarianceParams) -> np.ndarray:
        u = [np.log(params.theta1)]
        if self.fixed_smoothness is None:
            u.append(logit((params.theta2 - self.lo) / (self.hi - self.lo)))
        u.extend([np.log(params.theta3), np.log(params.theta4), np.log(params.nugget)])
        return np.array(u, dtype=float)

    def to_params(self, u) -> CovarianceParams:
        u = np.asarray(u, dtype=float)
        if self.fixed_smoothness is None:
            theta2 = self.lo + (self.hi - self.lo) * float(expit(u[1]))
            rest = u[2:]
        else:
            theta2 = self.fixed_smoothness
            rest = u[1:]
        return CovarianceParams(
            theta1=float(np.exp(u[0])),
            theta2=theta2,
            theta3=float(np.exp(rest[0])),
            theta4=float(np.exp(rest[1])),
            nugget=float(np.exp(rest[2])),
        )

    def jacobian_diagonal(self, params: CovarianceParams) -> dict[str, float]:
        """d(theta)/du for each estimated parameter."""
        jac = {"theta1": params.theta1, "theta3": params.theta3, "theta4": params.theta4, "nugget": params.nugget}
        if self.fixed_smoothness is None:
            s = (params.theta2 - self.lo) / (self.hi - self.lo)
            jac["theta2"] = (self.hi - self.lo) * s * (1.0 - s)
        return jac


# ============================================================================
# Starting values
# ============================================================================


def starting_values(observations: ObservationSet, X: np.ndarray, config: Optional[FitConfig] = None) -> CovarianceParams:
    """OLS-moment starting values.

    theta1 and the nugget split the OLS residual variance 90/10, theta3 is a
    tenth of the largest chordal extent and theta4 is one day.

    Raises:
        DegenerateResponseError: If the OLS residuals have no variance
    """
    config = config or FitConfig()
    y = np.asarray(observations.wind, dtype=float)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    v = float(np.var(resid, ddof=1)) if y.size > 1 else 0.0
    scale = max(1.0, float(np.max(np.abs(y)))) if y.size else 1.0
    if not v > (1e-12 * scale) ** 2:
        raise DegenerateResponseError("OLS residual variance is zero; the response has nothing left to model")

    extent = max_chordal_extent(observations.lon, observations.lat)
    theta3 = 0.1 * extent if extent > 0.0 else 1.0
    theta2 = config.fix_smoothness if config.fix_smoothness is not None else 0.5
    return CovarianceParams(theta1=0.9 * v, theta2=theta2, theta3=theta3, theta4=START_TIME_RANGE_S, nugget=0.1 * v)


# ============================================================================
# Summaries
# ============================================================================


def standard_errors(
    engine: VecchiaEngine,
    params: CovarianceParams,
    gls: GLSResult,
    transform: ParameterTransform,
    step: float = 1e-4,
) -> tuple[MeanParams, dict[str, Optional[float]], np.ndarray]:
    """Standard errors of beta (GLS covariance) and theta (observed information).

    Returns:
        (se of beta, se of theta by name with None when unavailable,
        covariance of the transformed coordinates or an empty array)
    """
    se_beta = MeanParams.from_vector(np.sqrt(np.clip(np.diag(gls.cov_beta), 0.0, None)))
    se_theta: dict[str, Optional[float]] = {name: None for name in THETA_NAMES}

    def loglik(u):
        try:
            return engine.gls(transform.to_params(u)).loglik
        except (FactorizationError, ValueError):
            return np.nan

    u = transform.to_unconstrained(params)
    H = finite_difference_hessian(loglik, u, step)
    information = -H
    if not np.all(np.isfinite(information)):
        logger.warning("Hessian has non-finite entries; theta standard errors unavailable")
        return se_beta, se_theta, np.empty((0, 0))
    try:
        np.linalg.cholesky(information)
    except np.linalg.LinAlgError:
        logger.warning("Observed information is not positive definite; theta standard errors unavailable")
        return se_beta, se_theta, np.empty((0, 0))

    cov_u = np.linalg.inv(information)
    jac = transform.jacobian_diagonal(params)
    for k, name in enumerate(transform.names):
        se_theta[name] = float(abs(jac[name]) * np.sqrt(cov_u[k, k]))
    return se_beta, se_theta, cov_u


def bias_summary(result: FitResult, cov_contrasts: Optional[np.ndarray] = None) -> BiasEstimates:
    """Starboard, port and port-minus-starboard contrasts plus sqrt(2) sigma.

    The port-minus-starboard error uses the 2 x 2 (c2, c3) covariance, taken
    from ``cov_contrasts`` or else from the result. Results that carry no
    covariance fall back to independent contrasts.
    """
    if cov_contrasts is None and result.cov_contrasts is not None:
        cov_contrasts = np.asarray(result.cov_contrasts, dtype=float)
    return _bias_estimates(result.theta, result.beta, result.se_beta, result.se_theta, cov_contrasts)


def _bias_estimates(
    theta: CovarianceParams,
    beta: MeanParams,
    se: MeanParams,
    se_theta: dict[str, Optional[float]],
    cov_contrasts: Optional[np.ndarray],
) -> BiasEstimates:
    if cov_contrasts is not None:
        var_diff = cov_contrasts[1, 1] + cov_contrasts[0, 0] - 2.0 * cov_contrasts[0, 1]
    else:
        var_diff = se.c2**2 + se.c3**2
    noise_sd_diff = theta.noise_sd_diff
    se_nugget = se_theta.get("nugget")
    se_noise = None
    if se_nugget is not None:
        # sqrt(2 sigma^2) = sqrt(2) exp(u / 2) with u = log sigma^2
        se_noise = float(0.5 * noise_sd_diff * se_nugget / theta.nugget)
    return BiasEstimates(
        starboard=beta.c2,
        se_starboard=se.c2,
        port=beta.c3,
        se_port=se.c3,
        port_minus_starboard=beta.c3 - beta.c2,
        se_port_minus_starboard=float(np.sqrt(max(var_diff, 0.0))),
        noise_sd_diff=noise_sd_diff,
        se_noise_sd_diff=se_noise,
    )


def neighbor_correlation(observations: ObservationSet, params: CovarianceParams) -> float:
    """Median fitted Matern correlation between each record and its nearest other record."""
    if len(observations) < 2:
        return 1.0
    coords = scaled_coordinates(observations.lon, observations.lat, observations.time, params.theta3, params.theta4)
    dist, _ = cKDTree(coords).query(coords, k=2)
    return float(np.median(matern(dist[:, 1], params.theta2)))


def boundary_solution(
    engine: VecchiaEngine, params: CovarianceParams, step: float = 1e-4
) -> tuple[CovarianceParams, GLSResult, dict[str, Optional[float]]]:
    """Move a collapsed fit to theta1 = 0 with the total variance kept as nugget.

    Only the nugget stays identified; its standard error comes from the
    profiled log-likelihood curvature in log sigma^2.
    """
    collapsed = params.model_copy(update={"theta1": 0.0, "nugget": params.theta1 + params.nugget})
    gls = engine.gls(collapsed)

    def loglik(v):
        return engine.gls(collapsed.model_copy(update={"nugget": float(np.exp(v[0]))})).loglik

    curvature = finite_difference_hessian(loglik, [np.log(collapsed.nugget)], step)[0, 0]
    se_theta: dict[str, Optional[float]] = {name: None for name in THETA_NAMES}
    if np.isfinite(curvature) and curvature < 0.0:
        se_theta["nugget"] = float(collapsed.nugget * np.sqrt(-1.0 / curvature))
    return collapsed, gls, se_theta


def quality_flags(
    params: CovarianceParams, config: FitConfig, converged: bool, se_theta: dict[str, Optional[float]]
) -> list[str]:
    """Data-quality flags of a finished fit."""
    flags = []
    if params.theta1 <= 1e-4 * (params.theta1 + params.nugget):
        flags.append("theta1_at_lower_boundary")
    if config.fix_smoothness is None:
        lo, hi = config.smoothness_bounds
        tol = 1e-3 * (hi - lo)
        if params.theta2 - lo <= tol or hi - params.theta2 <= tol:
            flags.append("smoothness_at_bound")
    if all(value is None for value in se_theta.values()):
        flags.append("theta_se_unavailable")
    if not converged:
        flags.append("not_converged")
    return flags


# ============================================================================
# Fitting
# ============================================================================


def fit_model(observations: ObservationSet, config: Optional[FitConfig] = None) -> FitResult:
    """Fit the space-time model to one pooled set.

    Args:
        observations: Reference plus CYGNSS-antenna records
        config: Fit configuration

    Returns:
        FitResult; a fit that did not reach the gradient tolerance is
        returned with ``converged=False`` and its best values

    Raises:
        InsufficientDataError: If the set has fewer than ``config.min_n`` records
        IdentifiabilityError: If a sensor group is missing
        RankDeficiencyError: If the design is rank deficient
        DegenerateResponseError: If the response has no residual variance
        FactorizationError: If the starting covariance cannot be factorized
    """
    config = config or FitConfig()
    n = len(observations)
    if n < config.min_n:
        raise InsufficientDataError(f"fit requires at least {config.min_n} observations, got {n}")

    std = standardize(observations)
    X = build_design(observations, std)
    check_rank(X)
    start = starting_values(observations, X, config)
    logger.info(
        f"Fitting n={n}, m={config.m}: start theta1={start.theta1:.4g}, theta3={start.theta3:.4g} km, "
        f"nugget={start.nugget:.4g}"
    )

    plan = build_plan(observations, config.m, start.scaling)
    engine = VecchiaEngine(observations, X, plan, threads=config.threads)
    transform = ParameterTransform(config.smoothness_bounds, config.fix_smoothness)

    try:
        engine.gls(start)
    except FactorizationError as e:
        raise FactorizationError(
            f"{e.message}; the starting values cannot be factorized, try different starting values", index=e.index
        ) from e

    def objective(u) -> float:
        try:
            value = -engine.gls(transform.to_params(u)).loglik / n
        except (FactorizationError, ValueError, OverflowError):
            return PENALTY
        return value if np.isfinite(value) else PENALTY

    def gradient(u) -> np.ndarray:
        return finite_difference_gradient(objective, u, config.fd_step)

    u = transform.to_unconstrained(start)
    best_u, best_f = u, objective(u)
    iterations = 0
    grad_norm = float(np.linalg.norm(gradient(u)))
    converged = grad_norm <= config.grad_tol
    attempt = 0
    while not converged and attempt <= config.restarts:
        res = minimize(
            objective,
            best_u,
            jac=gradient,
            method="L-BFGS-B",
            options={"maxiter": config.max_iter, "ftol": config.rel_tol, "gtol": config.grad_tol},
        )
        iterations += int(res.nit)
        if res.fun <= best_f:
            best_u, best_f = np.asarray(res.x, dtype=float), float(res.fun)
        grad_norm = float(np.linalg.norm(gradient(best_u)))
        converged = grad_norm <= config.grad_tol
        logger.debug(
            f"L-BFGS-B attempt {attempt}: f={best_f:.8g}, |g|={grad_norm:.3g}, nit={res.nit}, msg={res.message}"
        )
        attempt += 1

    theta = transform.to_params(best_u)
    gls = engine.gls(theta)
    if not converged:
        logger.warning(f"Fit did not converge: gradient norm {grad_norm:.3g} > {config.grad_tol}")

    provenance = {
        "plan": plan.describe(),
        "plan_note": "ordering and neighbors fixed from the starting (theta3, theta4) for the whole optimization",
        "start": start.model_dump(),
        "config": config.model_dump(),
        "data": dict(observations.provenance),
    }

    rho = neighbor_correlation(observations, theta)
    if rho < COLLAPSE_CORRELATION:
        interior_theta, interior_loglik = theta, gls.loglik
        theta, gls, se_theta = boundary_solution(engine, theta, config.hessian_step)
        logger.warning(
            f"Anomaly range collapsed (median neighbor correlation {rho:.3g}); "
            f"reporting theta1 = 0 with nugget {theta.nugget:.4g}"
        )
        provenance["boundary"] = {
            "neighbor_correlation": rho,
            "interior_theta": interior_theta.model_dump(),
            "interior_loglik": interior_loglik,
            "boundary_loglik": gls.loglik,
        }
        se_beta = MeanParams.from_vector(np.sqrt(np.clip(np.diag(gls.cov_beta), 0.0, None)))
    else:
        se_beta, se_theta, _ = standard_errors(engine, theta, gls, transform, config.hessian_step)

    beta = gls.mean_params
    cov_contrasts = gls.cov_beta[CONTRAST_SLICE, CONTRAST_SLICE]
    result = FitResult(
        theta=theta,
        beta=beta,
        se_beta=se_beta,
        se_theta=se_theta,
        loglik=gls.loglik,
        converged=converged,
        iterations=iterations,
        gradient_norm=grad_norm,
        n=n,
        standardization=std,
        cov_contrasts=cov_contrasts.tolist(),
        bias_summary=_bias_estimates(theta, beta, se_beta, se_theta, cov_contrasts),
        flags=quality_flags(theta, config, converged, se_theta),
        provenance=provenance,
    )
    logger.info(
        f"Fit done: loglik={result.loglik:.6g}, c2={result.beta.c2:.4f}, c3={result.beta.c3:.4f}, "
        f"converged={converged}, flags={result.flags}"
    )
    return result
