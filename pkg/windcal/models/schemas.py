"""Pydantic models for run configuration, results and matchups."""

from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from windcal.models.observations import Observation
from windcal.models.params import SMOOTHNESS_BOUNDS, CovarianceParams, MeanParams, Standardization


# ============================================================================
# Fitting
# ============================================================================


class FitConfig(BaseModel):
    """Settings of one maximum-likelihood fit."""

    model_config = ConfigDict(
        frozen=True,
        extra="forbid",
        json_schema_extra={"example": {"m": 30, "max_iter": 200, "rel_tol": 1e-8, "grad_tol": 1e-4, "seed": 0}},
    )

    m: int = Field(default=30, ge=1, description="Vecchia neighbor count")
    max_iter: int = Field(default=200, ge=1, description="Maximum quasi-Newton iterations per restart")
    rel_tol: float = Field(default=1e-8, gt=0.0, description="Relative log-likelihood change tolerance")
    grad_tol: float = Field(default=1e-4, gt=0.0, description="Gradient norm tolerance (per-observation objective)")
    smoothness_bounds: tuple[float, float] = Field(default=SMOOTHNESS_BOUNDS, description="Box for theta2")
    fix_smoothness: Optional[float] = Field(default=None, description="Hold theta2 at this value instead of estimating it")
    start_rule: Literal["ols-moments"] = Field(default="ols-moments", description="Starting-value rule id")
    fd_step: float = Field(default=1e-5, gt=0.0, description="Central-difference step for gradients")
    hessian_step: float = Field(default=1e-4, gt=0.0, description="Central-difference step for the Hessian")
    restarts: int = Field(default=2, ge=0, description="Fresh quasi-Newton restarts when not converged")
    min_n: int = Field(default=50, ge=1, description="Smallest set accepted by a fit")
    seed: int = Field(default=0, description="Seed recorded with the fit and used for subsampling")
    threads: Optional[int] = Field(default=None, ge=1, description="Factor-block workers (None: settings)")

    @model_validator(mode="after")
    def _check_bounds(self) -> "FitConfig":
        lo, hi = self.smoothness_bounds
        if not (0.0 < lo < hi):
            raise ValueError(f"smoothness bounds must satisfy 0 < lo < hi, got {self.smoothness_bounds}")
        if self.fix_smoothness is not None and not (lo <= self.fix_smoothness <= hi):
            raise ValueError(f"fix_smoothness {self.fix_smoothness} outside bounds {self.smoothness_bounds}")
        return self


class BiasEstimates(BaseModel):
    """Bias and noise quantities of one fit."""

    starboard: float = Field(..., description="a2 - a1 (m/s)")
    se_starboard: float = Field(..., description="Standard error of a2 - a1")
    port: float = Field(..., description="a3 - a1 (m/s)")
    se_port: float = Field(..., description="Standard error of a3 - a1")
    port_minus_starboard: float = Field(..., description="a3 - a2 (m/s)")
    se_port_minus_starboard: float = Field(..., description="Standard error of a3 - a2")
    noise_sd_diff: float = Field(..., description="sqrt(2) * sigma (m/s)")
    se_noise_sd_diff: Optional[float] = Field(default=None, description="Delta-method standard error, if available")


class FitResult(BaseModel):
    """Outcome of one fit, serialized with stable field names."""

    theta: CovarianceParams = Field(..., description="Covariance estimates")
    beta: MeanParams = Field(..., description="Mean and contrast estimates")
    se_beta: MeanParams = Field(..., description="Standard errors of beta")
    se_theta: dict[str, Optional[float]] = Field(..., description="Standard errors of theta (None: unavailable)")
    cov_contrasts: Optional[list[list[float]]] = Field(
        default=None, description="2 x 2 GLS covariance of (c2, c3)"
    )
    loglik: float = Field(..., description="Final Vecchia log-likelihood")
    converged: bool = Field(..., description="Gradient norm reached the tolerance")
    iterations: int = Field(..., ge=0, description="Quasi-Newton iterations over all restarts")
    gradient_norm: float = Field(..., description="Final gradient norm of the per-observation objective")
    n: int = Field(..., ge=0, description="Observations used")
    standardization: Standardization = Field(..., description="Covariate standardization")
    bias_summary: BiasEstimates = Field(..., description="Derived bias and noise summaries")
    flags: list[str] = Field(default_factory=list, description="Data-quality flags")
    provenance: dict = Field(default_factory=dict, description="Plan, config and data provenance")


class FitFailure(BaseModel):
    """Placeholder document written when a campaign fit raises."""

    status: Literal["failed"] = "failed"
    error_code: str = Field(..., description="Error code")
    error: str = Field(..., description="Error message")
    provenance: dict = Field(default_factory=dict, description="Platform, week and data provenance")


# ============================================================================
# Simulation
# ============================================================================


class TrackSpec(BaseModel):
    """Idealized ground track of one platform."""

    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1, description="Platform label")
    role: Literal["reference", "cygnss"] = Field(..., description="Reference sensor or two-antenna platform")
    lat_band_deg: float = Field(default=38.0, gt=0.0, le=90.0, description="Latitude amplitude")
    period_s: float = Field(default=5700.0, gt=0.0, description="Latitude oscillation period (orbit-like)")
    lon_rate_deg_s: float = Field(default=0.0632, description="Longitude advance per second")
    lon0_deg: float = Field(default=0.0, description="Longitude at the start time")
    phase_rad: float = Field(default=0.0, description="Latitude phase at the start time")
    cross_track_offset_km: float = Field(default=50.0, ge=0.0, description="Starboard/port separation")
    starboard_bias: Optional[float] = Field(default=None, description="Per-platform starboard contrast override")
    port_bias: Optional[float] = Field(default=None, description="Per-platform port contrast override")


class SimConfig(BaseModel):
    """Synthetic data configuration, read from JSON."""

    model_config = ConfigDict(extra="forbid")

    start_time: float = Field(default=0.0, description="Start (seconds since 2020-01-01 00:00 UTC)")
    duration_s: float = Field(default=86400.0, gt=0.0, description="Simulated span")
    cadence_s: float = Field(default=60.0, gt=0.0, description="Sampling cadence along each track")
    n_per_platform: Optional[int] = Field(default=None, ge=1, description="Uniform thinning to this many samples")
    platforms: list[TrackSpec] = Field(..., min_length=1, description="Platform tracks")
    theta: CovarianceParams = Field(..., description="True covariance parameters")
    mean: MeanParams = Field(default_factory=MeanParams, description="True mean coefficients and contrasts")
    seed: int = Field(default=0, description="Random seed")

    @field_validator("platforms")
    @classmethod
    def _unique_names(cls, platforms: list[TrackSpec]) -> list[TrackSpec]:
        names = [p.name for p in platforms]
        if len(set(names)) != len(names):
            raise ValueError(f"platform names must be unique: {names}")
        return platforms


# ============================================================================
# Empirical matchups
# ============================================================================


class MatchedPair(BaseModel):
    """Closest CYGNSS/reference pair of one window."""

    window_id: int = Field(..., description="Window index relative to the anchor")
    sep_km: float = Field(..., ge=0.0, description="Chordal separation (km)")
    cyg: Observation = Field(..., description="CYGNSS-antenna record")
    ref: Observation = Field(..., description="Reference-sensor record")


class MatchedPairs(BaseModel):
    """Window-wise matchups of one platform antenna against the reference."""

    pairs: list[MatchedPair] = Field(default_factory=list, description="Pairs in window order")
    window_s: float = Field(..., gt=0.0, description="Window length (s)")
    max_km: float = Field(..., ge=0.0, description="Largest accepted separation (km)")
    anchor: float = Field(default=0.0, description="Time of the first window boundary")

    def __len__(self) -> int:
        return len(self.pairs)


class EmpiricalBias(BaseModel):
    """Mean CYGNSS-minus-reference difference over matched pairs."""

    bias: float = Field(..., description="Mean difference (m/s)")
    se: Optional[float] = Field(default=None, description="Standard error (needs two or more pairs)")
    count: int = Field(..., ge=1, description="Pair count")


class BinnedDifference(BaseModel):
    """Mean difference of pairs whose average falls in one bin."""

    bin_center: float = Field(..., description="Bin center (m/s)")
    mean_diff: float = Field(..., description="Mean CYGNSS minus reference (m/s)")
    count: int = Field(..., ge=1, description="Pairs in the bin")


class DifferenceTrend(BaseModel):
    """Least-squares line of pair difference against pair average."""

    slope: float = Field(..., description="Slope (dimensionless)")
    intercept: float = Field(..., description="Intercept (m/s)")
    se_slope: float = Field(..., description="Standard error of the slope")
    ci_low: float = Field(..., description="Lower 95% bound of the slope")
    ci_high: float = Field(..., description="Upper 95% bound of the slope")
    count: int = Field(..., description="Pair count")


# ============================================================================
# Campaign
# ============================================================================


class CampaignSpec(BaseModel):
    """Weeks x platforms fitting campaign, read from JSON."""

    model_config = ConfigDict(extra="forbid")

    reference_path: str = Field(..., description="Interchange CSV with the reference-sensor records")
    platform_paths: dict[str, str] = Field(..., min_length=1, description="Platform label -> interchange CSV")
    week_starts: Union[Literal["study"], list[Union[float, str]]] = Field(
        ..., description="Window starts: seconds, ISO timestamps, or 'study' for the 49-week calendar"
    )
    n_per_source: int = Field(default=20000, ge=1, description="Subsample size per source group")
    seed: int = Field(default=0, description="Base seed for subsampling")
    fit: FitConfig = Field(default_factory=FitConfig, description="Fit configuration")
    output_dir: str = Field(..., description="Directory for results")
    threads: Optional[int] = Field(default=None, ge=1, description="Worker processes (None: settings)")
    empirical: bool = Field(default=True, description="Also run the matchup analysis per week")
    window_s: float = Field(default=7200.0, gt=0.0, description="Matchup window length (s)")
    max_km: float = Field(default=25.0, ge=0.0, description="Matchup separation cap (km)")

    @field_validator("week_starts")
    @classmethod
    def _non_empty(cls, value):
        if isinstance(value, list) and not value:
            raise ValueError("week_starts must not be empty")
        return value
