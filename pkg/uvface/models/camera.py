"""Camera-related data models."""

import math
from typing import ClassVar, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .arrays import as_array, require_finite


class ProjectionParams(BaseModel):
    """The 6-dim weak-perspective camera vector m."""

    model_config = ConfigDict(frozen=True)

    # serialisation order of the 6 numbers
    ORDER: ClassVar[Tuple[str, ...]] = ("f", "pitch", "yaw", "roll", "tx", "ty")

    f: float = Field(..., gt=0, description="Scale in pixels per model unit")
    pitch: float = Field(0.0, description="Rotation about x in radians")
    yaw: float = Field(0.0, description="Rotation about y in radians")
    roll: float = Field(0.0, description="Rotation about z in radians")
    tx: float = Field(0.0, description="Horizontal translation in pixels")
    ty: float = Field(0.0, description="Vertical translation in pixels")

    @field_validator("f", "pitch", "yaw", "roll", "tx", "ty")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("projection parameters must be finite")
        return value

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> "ProjectionParams":
        """Build from (f, pitch, yaw, roll, tx, ty)."""
        values = [float(v) for v in vector]
        if len(values) != 6:
            raise ValueError(f"projection vector needs 6 numbers, got {len(values)}")
        return cls(**dict(zip(cls.ORDER, values)))

    def to_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in self.ORDER])

    @property
    def angles(self) -> Tuple[float, float, float]:
        return (self.pitch, self.yaw, self.roll)

    @property
    def t2d(self) -> np.ndarray:
        return np.array([self.tx, self.ty])


class ProjectedVertices(BaseModel):
    """Image-plane coordinates V^2D and camera-space depth of each vertex."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    coords: np.ndarray = Field(..., description="(Q, 2) pixel coordinates (x, y)")
    depth: np.ndarray = Field(..., description="(Q,) camera-space z, smaller is closer")

    @field_validator("coords", mode="before")
    @classmethod
    def _coords(cls, value: object) -> np.ndarray:
        coords = as_array(value, "coords", ndim=2, trailing=(2,))
        return require_finite(coords, "coords")

    @field_validator("depth", mode="before")
    @classmethod
    def _depth(cls, value: object) -> np.ndarray:
        return require_finite(as_array(value, "depth", ndim=1), "depth")

    @model_validator(mode="after")
    def _check(self) -> "ProjectedVertices":
        if self.coords.shape[0] != self.depth.shape[0]:
            raise ValueError("coords and depth must have the same length")
        return self
