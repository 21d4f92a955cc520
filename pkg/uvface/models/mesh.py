"""Mesh topology and UV-space data models."""

from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .arrays import as_array, require_finite

NUM_LANDMARKS = 68


class UnwrapConstants(BaseModel):
    """Scale and translation scalars of the cylindrical unwrap."""

    model_config = ConfigDict(frozen=True)

    alpha1: float = Field(..., description="Scale of the atan2(x, z) term (v axis)")
    beta1: float = Field(..., description="Translation of the v axis")
    alpha2: float = Field(..., description="Scale of the y term (u axis)")
    beta2: float = Field(..., description="Translation of the u axis")

    @field_validator("alpha1", "alpha2")
    @classmethod
    def _nonzero(cls, value: float) -> float:
        if value == 0:
            raise ValueError("unwrap scale must be nonzero")
        return value

    def as_tuple(self) -> Tuple[float, float, float, float]:
        """Return (alpha1, beta1, alpha2, beta2)."""
        return (self.alpha1, self.beta1, self.alpha2, self.beta2)


class Topology(BaseModel):
    """Fixed triangle list, landmark indices and per-vertex UV coordinates."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    triangles: np.ndarray = Field(..., description="(T, 3) vertex indices")
    landmark_indices: np.ndarray = Field(..., description="68 landmark vertex ids")
    uv_coords: np.ndarray = Field(..., description="(Q, 2) texel coordinates (u, v)")
    num_vertices: int = Field(..., gt=0, description="Vertex count Q")
    uv_shape: Tuple[int, int] = Field(..., description="UV grid size (U, V)")
    eye_corner_indices: Tuple[int, int] = Field(
        (0, 0), description="Vertex ids of the two outer eye corners"
    )

    @field_validator("triangles", mode="before")
    @classmethod
    def _triangles(cls, value: object) -> np.ndarray:
        return as_array(value, "triangles", dtype=np.int64, ndim=2, trailing=(3,))

    @field_validator("landmark_indices", mode="before")
    @classmethod
    def _landmarks(cls, value: object) -> np.ndarray:
        array = as_array(value, "landmark_indices", dtype=np.int64, ndim=1)
        if array.shape[0] != NUM_LANDMARKS:
            raise ValueError(
                f"landmark_indices must have {NUM_LANDMARKS} entries, "
                f"got {array.shape[0]}"
            )
        return array

    @field_validator("uv_coords", mode="before")
    @classmethod
    def _uv(cls, value: object) -> np.ndarray:
        array = as_array(value, "uv_coords", ndim=2, trailing=(2,))
        return require_finite(array, "uv_coords")

    @model_validator(mode="after")
    def _check(self) -> "Topology":
        q = self.num_vertices
        if self.uv_coords.shape[0] != q:
            raise ValueError(
                f"uv_coords has {self.uv_coords.shape[0]} rows but Q={q}"
            )
        for name, idx in (
            ("triangles", self.triangles),
            ("landmark_indices", self.landmark_indices),
            ("eye_corner_indices", np.asarray(self.eye_corner_indices)),
        ):
            if idx.size and (idx.min() < 0 or idx.max() >= q):
                raise ValueError(f"{name} contains indices outside [0, {q})")
        u_max, v_max = self.uv_shape[0] - 1, self.uv_shape[1] - 1
        uv = self.uv_coords
        if (
            uv[:, 0].min() < 0
            or uv[:, 1].min() < 0
            or uv[:, 0].max() > u_max
            or uv[:, 1].max() > v_max
        ):
            raise ValueError(f"uv_coords must lie within [0,{u_max}]x[0,{v_max}]")
        a, b, c = (uv[self.triangles[:, i]] for i in range(3))
        area2 = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
            c[:, 0] - a[:, 0]
        )
        degenerate = np.flatnonzero(area2 == 0)
        if degenerate.size:
            raise ValueError(
                f"triangle {int(degenerate[0])} has zero area in UV space"
            )
        return self

    @property
    def num_triangles(self) -> int:
        return int(self.triangles.shape[0])


class VertexShape(BaseModel):
    """Per-vertex 3D positions S (Q x 3)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    positions: np.ndarray = Field(..., description="(Q, 3) vertex positions")

    @field_validator("positions", mode="before")
    @classmethod
    def _positions(cls, value: object) -> np.ndarray:
        array = as_array(value, "positions", ndim=2, trailing=(3,))
        return require_finite(array, "positions")

    @classmethod
    def from_flat(cls, flat: np.ndarray) -> "VertexShape":
        """Build from the 3Q vector layout (x0, y0, z0, x1, ...)."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.ndim != 1 or flat.size % 3:
            raise ValueError(f"flat shape vector must have 3Q entries, got {flat.size}")
        return cls(positions=flat.reshape(-1, 3))

    @property
    def flat(self) -> np.ndarray:
        return self.positions.reshape(-1)

    @property
    def num_vertices(self) -> int:
        return int(self.positions.shape[0])


class UVMap(BaseModel):
    """A U x V x C array over the UV grid with a face-region mask."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray = Field(..., description="(U, V, C) values")
    mask: np.ndarray = Field(..., description="(U, V) validity flags")

    @field_validator("data", mode="before")
    @classmethod
    def _data(cls, value: object) -> np.ndarray:
        return as_array(value, "data", ndim=3)

    @field_validator("mask", mode="before")
    @classmethod
    def _mask(cls, value: object) -> np.ndarray:
        return as_array(value, "mask", dtype=bool, ndim=2)

    @model_validator(mode="after")
    def _check(self) -> "UVMap":
        if self.mask.shape != self.data.shape[:2]:
            raise ValueError(
                f"mask shape {self.mask.shape} does not match data {self.data.shape}"
            )
        require_finite(self.data[self.mask], "masked-in texels")
        return self

    @property
    def shape(self) -> Tuple[int, int]:
        return (int(self.data.shape[0]), int(self.data.shape[1]))


class UVShapeMap(UVMap):
    """S^uv: x, y, z positions stored per texel."""


class UVAlbedoMap(UVMap):
    """A^uv: RGB reflectance per texel."""

    def in_unit_range(self) -> bool:
        """Check the [0, 1] reflectance invariant on masked-in texels."""
        values = self.data[self.mask]
        return bool(np.all((values >= 0.0) & (values <= 1.0)))


class UVTextureMap(UVMap):
    """T^uv: shaded RGB texture per texel."""


class UVShadingMap(UVMap):
    """C^uv: SH shading per texel and channel."""


class UVNormalMap(UVMap):
    """Unit normals of the rotated shape resampled to the UV grid."""


class UVLookup(BaseModel):
    """Per-texel enclosing UV triangle and barycentric weights."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    tri_id: np.ndarray = Field(..., description="(U, V) triangle id, -1 outside")
    bary: np.ndarray = Field(..., description="(U, V, 3) barycentric weights")

    @property
    def mask(self) -> np.ndarray:
        return self.tri_id >= 0

    @property
    def shape(self) -> Tuple[int, int]:
        return (int(self.tri_id.shape[0]), int(self.tri_id.shape[1]))
