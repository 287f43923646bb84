"""Observation types: single wind-speed records and columnar record sets."""

from enum import IntEnum
from typing import Any, Iterable, Iterator, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def normalize_longitude(lon):
    """Wrap longitudes (scalar or array) into [-180, 180)."""
    return (np.asarray(lon, dtype=float) + 180.0) % 360.0 - 180.0


class Sensor(IntEnum):
    """Sensor class codes used in the interchange format."""

    REFERENCE = 1
    STARBOARD = 2
    PORT = 3


SENSOR_NAMES = {
    Sensor.REFERENCE: "reference",
    Sensor.STARBOARD: "starboard",
    Sensor.PORT: "port",
}


class SpaceTimePoint(BaseModel):
    """Location on the sphere at a moment in time."""

    model_config = ConfigDict(frozen=True)

    lon: float = Field(..., description="Longitude (degrees)")
    lat: float = Field(..., ge=-90.0, le=90.0, description="Latitude (degrees)")
    time: float = Field(default=0.0, description="Seconds since 2020-01-01 00:00 UTC")

    @field_validator("lon")
    @classmethod
    def _wrap_lon(cls, value: float) -> float:
        return float(normalize_longitude(value))


class Observation(BaseModel):
    """One wind-speed measurement."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {"time": 0.0, "lon": 0.0, "lat": 0.0, "wind": 5.0, "sensor": 1, "platform": "jas3"}
        },
    )

    time: float = Field(..., allow_inf_nan=False, description="Seconds since 2020-01-01 00:00 UTC")
    lon: float = Field(..., allow_inf_nan=False, description="Longitude in [-180, 180)")
    lat: float = Field(..., ge=-90.0, le=90.0, description="Latitude (degrees)")
    wind: float = Field(..., ge=0.0, allow_inf_nan=False, description="Wind speed (m/s)")
    sensor: Sensor = Field(..., description="Sensor class")
    platform: str = Field(..., min_length=1, description="Platform label, e.g. cyg01 or jas3")

    @field_validator("lon")
    @classmethod
    def _wrap_lon(cls, value: float) -> float:
        return float(normalize_longitude(value))

    @property
    def point(self) -> SpaceTimePoint:
        return SpaceTimePoint(lon=self.lon, lat=self.lat, time=self.time)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


class ObservationSet(BaseModel):
    """Ordered, immutable collection of observations stored column-wise."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    time: np.ndarray
    lon: np.ndarray
    lat: np.ndarray
    wind: np.ndarray
    sensor: np.ndarray
    platform: np.ndarray
    provenance: dict = Field(default_factory=dict, description="Source files, filters applied, seeds")

    @model_validator(mode="before")
    @classmethod
    def _coerce_columns(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        for name in ("time", "lon", "lat", "wind"):
            data[name] = np.asarray(data.get(name, []), dtype=float).reshape(-1)
        data["sensor"] = np.asarray(data.get("sensor", []), dtype=np.int64).reshape(-1)
        data["platform"] = np.asarray(data.get("platform", []), dtype=object).reshape(-1)
        return data

    @model_validator(mode="after")
    def _check_invariants(self) -> "ObservationSet":
        n = self.time.shape[0]
        for name in ("lon", "lat", "wind", "sensor", "platform"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"column '{name}' has {getattr(self, name).shape[0]} rows, expected {n}")
        if not np.all(np.isfinite(self.time)):
            raise ValueError("time must be finite")
        if not np.all(np.isfinite(self.lon)):
            raise ValueError("lon must be finite")
        if np.any(~np.isfinite(self.lat) | (self.lat < -90.0) | (self.lat > 90.0)):
            raise ValueError("lat must lie within [-90, 90]")
        if np.any(~np.isfinite(self.wind) | (self.wind < 0.0)):
            raise ValueError("wind must be finite and non-negative")
        if np.any(~np.isin(self.sensor, [int(s) for s in Sensor])):
            raise ValueError("sensor codes must be 1, 2 or 3")
        # Columns are read-only after construction; lon is wrapped here.
        object.__setattr__(self, "lon", _frozen(normalize_longitude(self.lon)))
        for name in ("time", "lat", "wind", "sensor", "platform"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        return self

    # ------------------------------------------------------------------
    # Construction helpers
    # ------------------------------------------------------------------

    @classmethod
    def empty(cls, provenance: Optional[dict] = None) -> "ObservationSet":
        return cls(time=[], lon=[], lat=[], wind=[], sensor=[], platform=[], provenance=provenance or {})

    @classmethod
    def from_observations(
        cls, observations: Iterable[Observation], provenance: Optional[dict] = None
    ) -> "ObservationSet":
        """Build a set from individual Observation records."""
        records = list(observations)
        return cls(
            time=[o.time for o in records],
            lon=[o.lon for o in records],
            lat=[o.lat for o in records],
            wind=[o.wind for o in records],
            sensor=[int(o.sensor) for o in records],
            platform=[o.platform for o in records],
            provenance=provenance or {},
        )

    @classmethod
    def concat(cls, sets: Sequence["ObservationSet"], provenance: Optional[dict] = None) -> "ObservationSet":
        """Concatenate sets in the given order."""
        if not sets:
            return cls.empty(provenance)
        return cls(
            time=np.concatenate([s.time for s in sets]),
            lon=np.concatenate([s.lon for s in sets]),
            lat=np.concatenate([s.lat for s in sets]),
            wind=np.concatenate([s.wind for s in sets]),
            sensor=np.concatenate([s.sensor for s in sets]),
            platform=np.concatenate([s.platform for s in sets]),
            provenance=provenance or {},
        )

    def take(self, indices, provenance: Optional[dict] = None) -> "ObservationSet":
        """Return the records at ``indices`` (positions or boolean mask)."""
        indices = np.asarray(indices)
        if indices.dtype != bool:
            indices = indices.astype(np.int64)
        return ObservationSet(
            time=self.time[indices],
            lon=self.lon[indices],
            lat=self.lat[indices],
            wind=self.wind[indices],
            sensor=self.sensor[indices],
            platform=self.platform[indices],
            provenance=dict(self.provenance) if provenance is None else provenance,
        )

    def with_wind(self, wind, provenance: Optional[dict] = None) -> "ObservationSet":
        """Return a copy with the wind column replaced."""
        return ObservationSet(
            time=self.time,
            lon=self.lon,
            lat=self.lat,
            wind=wind,
            sensor=self.sensor,
            platform=self.platform,
            provenance=dict(self.provenance) if provenance is None else provenance,
        )

    def with_provenance(self, **updates) -> "ObservationSet":
        provenance = dict(self.provenance)
        provenance.update(updates)
        return self.take(np.arange(len(self)), provenance=provenance)

    # ------------------------------------------------------------------
    # Access
    # ------------------------------------------------------------------

    def __len__(self) -> int:
        return int(self.time.shape[0])

    def records(self) -> Iterator[Observation]:
        for i in range(len(self)):
            yield self.record(i)

    def record(self, i: int) -> Observation:
        return Observation(
            time=float(self.time[i]),
            lon=float(self.lon[i]),
            lat=float(self.lat[i]),
            wind=float(self.wind[i]),
            sensor=Sensor(int(self.sensor[i])),
            platform=str(self.platform[i]),
        )

    def sensor_counts(self) -> dict[int, int]:
        codes, counts = np.unique(self.sensor, return_counts=True)
        return {int(c): int(k) for c, k in zip(codes, counts)}

    def platforms(self) -> list[str]:
        return sorted({str(p) for p in self.platform})

    def same_records(self, other: "ObservationSet") -> bool:
        """Field-exact comparison of the record columns (provenance ignored)."""
        return (
            len(self) == len(other)
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.lon, other.lon)
            and np.array_equal(self.lat, other.lat)
            and np.array_equal(self.wind, other.wind)
            and np.array_equal(self.sensor, other.sensor)
            and list(self.platform) == list(other.platform)
        )
