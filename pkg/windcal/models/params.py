"""Pydantic models for model parameters and fitted structure."""

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

SMOOTHNESS_BOUNDS = (0.1, 4.0)


# ============================================================================
# Covariance
# ============================================================================


class CovarianceParams(BaseModel):
    """Space-time Matern covariance parameters and the nugget.

    ``theta1`` may be zero, which expresses the pure-noise limit in which the
    anomaly process vanishes and records are independent.
    """

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {"theta1": 4.0, "theta2": 0.5, "theta3": 300.0, "theta4": 86400.0, "nugget": 0.28125}
        },
    )

    theta1: float = Field(..., ge=0.0, allow_inf_nan=False, description="Anomaly variance (m^2/s^2)")
    theta2: float = Field(..., ge=SMOOTHNESS_BOUNDS[0], le=SMOOTHNESS_BOUNDS[1], description="Matern smoothness")
    theta3: float = Field(..., gt=0.0, allow_inf_nan=False, description="Spatial range (km)")
    theta4: float = Field(..., gt=0.0, allow_inf_nan=False, description="Temporal range (s)")
    nugget: float = Field(..., gt=0.0, allow_inf_nan=False, description="Measurement noise variance sigma^2 (m^2/s^2)")

    @property
    def scaling(self) -> tuple[float, float]:
        return (self.theta3, self.theta4)

    @property
    def noise_sd_diff(self) -> float:
        """Standard deviation of a same-place, same-time cross-sensor difference."""
        return float(np.sqrt(2.0 * self.nugget))


# ============================================================================
# Mean model
# ============================================================================


class MeanParams(BaseModel):
    """Mean-field coefficients and sensor contrasts.

    The b coefficients apply to standardized time and latitude. ``c2`` and
    ``c3`` are the starboard and port contrasts against the reference sensor.
    """

    model_config = ConfigDict(frozen=True)

    b0: float = Field(default=0.0, description="Intercept (m/s)")
    b1: float = Field(default=0.0, description="Trend per standardized time unit")
    b2: float = Field(default=0.0, description="Linear latitude coefficient")
    b3: float = Field(default=0.0, description="Quadratic latitude coefficient")
    b4: float = Field(default=0.0, description="Cubic latitude coefficient")
    c2: float = Field(default=0.0, description="Starboard minus reference (m/s)")
    c3: float = Field(default=0.0, description="Port minus reference (m/s)")

    def to_vector(self) -> np.ndarray:
        """Coefficients in design column order."""
        return np.array([self.b0, self.b1, self.b2, self.b3, self.b4, self.c2, self.c3], dtype=float)

    @classmethod
    def from_vector(cls, beta) -> "MeanParams":
        b0, b1, b2, b3, b4, c2, c3 = (float(v) for v in np.asarray(beta, dtype=float))
        return cls(b0=b0, b1=b1, b2=b2, b3=b3, b4=b4, c2=c2, c3=c3)


class Standardization(BaseModel):
    """Centers and scales applied to time and latitude before expansion."""

    model_config = ConfigDict(frozen=True)

    time_center: float = Field(..., description="Time center (s)")
    time_scale: float = Field(..., gt=0.0, description="Time scale (s)")
    lat_center: float = Field(..., description="Latitude center (degrees)")
    lat_scale: float = Field(..., gt=0.0, description="Latitude scale (degrees)")

    def apply_time(self, time) -> np.ndarray:
        return (np.asarray(time, dtype=float) - self.time_center) / self.time_scale

    def apply_lat(self, lat) -> np.ndarray:
        return (np.asarray(lat, dtype=float) - self.lat_center) / self.lat_scale


# ============================================================================
# Vecchia conditioning structure
# ============================================================================


class NeighborPlan(BaseModel):
    """Ordering and conditioning sets of a Vecchia factorization.

    ``order[k]`` is the original index of the k-th ordered point;
    ``neighbors[k]`` holds ordered positions (all < k), padded with -1.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    order: np.ndarray
    neighbors: np.ndarray
    m: int = Field(..., ge=1, description="Neighbor count")
    scaling: tuple[float, float] = Field(..., description="(theta3, theta4) defining the metric")
    ordering: str = Field(default="maxmin", description="Ordering rule id")

    @model_validator(mode="after")
    def _check(self) -> "NeighborPlan":
        n = self.order.shape[0]
        if self.neighbors.shape != (n, self.m):
            raise ValueError(f"neighbors has shape {self.neighbors.shape}, expected {(n, self.m)}")
        if not np.array_equal(np.sort(self.order), np.arange(n)):
            raise ValueError("order is not a permutation")
        positions = np.arange(n)[:, None]
        valid = self.neighbors >= 0
        if np.any(valid & (self.neighbors >= positions)):
            raise ValueError("conditioning sets must reference earlier ordered points only")
        return self

    @property
    def n(self) -> int:
        return int(self.order.shape[0])

    def neighbor_counts(self) -> np.ndarray:
        return (self.neighbors >= 0).sum(axis=1)

    def describe(self) -> dict:
        return {
            "m": self.m,
            "ordering": self.ordering,
            "scaling": {"theta3": self.scaling[0], "theta4": self.scaling[1]},
            "n": self.n,
        }
