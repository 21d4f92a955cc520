"""Rendering-related data models."""

from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .arrays import as_array, require_finite
from .camera import ProjectedVertices, ProjectionParams
from .lighting import SHLighting
from .mesh import (
    UVAlbedoMap,
    UVLookup,
    UVNormalMap,
    UVShapeMap,
    UVTextureMap,
    VertexShape,
)

BARY_TOLERANCE = 1e-6


class FragmentBuffer(BaseModel):
    """Per-pixel triangle id, barycentric weights and depth."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    tri_id: np.ndarray = Field(..., description="(H, W) triangle id, -1 = background")
    bary: np.ndarray = Field(..., description="(H, W, 3) barycentric weights")
    depth: np.ndarray = Field(..., description="(H, W) interpolated depth")

    @field_validator("tri_id", mode="before")
    @classmethod
    def _tri_id(cls, value: object) -> np.ndarray:
        return as_array(value, "tri_id", dtype=np.int64, ndim=2)

    @field_validator("bary", mode="before")
    @classmethod
    def _bary(cls, value: object) -> np.ndarray:
        return as_array(value, "bary", ndim=3, trailing=(3,))

    @field_validator("depth", mode="before")
    @classmethod
    def _depth(cls, value: object) -> np.ndarray:
        return as_array(value, "depth", ndim=2)

    @model_validator(mode="after")
    def _check(self) -> "FragmentBuffer":
        grid = self.tri_id.shape
        if self.bary.shape[:2] != grid or self.depth.shape != grid:
            raise ValueError("tri_id, bary and depth must share the image size")
        covered = self.tri_id >= 0
        bary = self.bary[covered]
        if bary.size:
            if bary.min() < -BARY_TOLERANCE:
                raise ValueError("barycentric weights must be non-negative")
            if np.abs(bary.sum(axis=1) - 1.0).max() > BARY_TOLERANCE:
                raise ValueError("barycentric weights must sum to one")
        require_finite(self.depth[covered], "depth")
        return self

    @property
    def coverage(self) -> np.ndarray:
        return self.tri_id >= 0

    @property
    def size(self) -> Tuple[int, int]:
        """(height, width)."""
        return (int(self.tri_id.shape[0]), int(self.tri_id.shape[1]))


class RenderedImage(BaseModel):
    """Rendered RGB image and its coverage set."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    rgb: np.ndarray = Field(..., description="(H, W, 3) colours")
    coverage: np.ndarray = Field(..., description="(H, W) pixels covered by the mesh")

    @field_validator("rgb", mode="before")
    @classmethod
    def _rgb(cls, value: object) -> np.ndarray:
        return require_finite(as_array(value, "rgb", ndim=3, trailing=(3,)), "rgb")

    @field_validator("coverage", mode="before")
    @classmethod
    def _coverage(cls, value: object) -> np.ndarray:
        return as_array(value, "coverage", dtype=bool, ndim=2)

    @model_validator(mode="after")
    def _check(self) -> "RenderedImage":
        if self.coverage.shape != self.rgb.shape[:2]:
            raise ValueError("coverage must match the image size")
        return self

    @property
    def size(self) -> Tuple[int, int]:
        """(height, width)."""
        return (int(self.rgb.shape[0]), int(self.rgb.shape[1]))


class OcclusionMask(BaseModel):
    """Soft foreground mask M in [0, 1]."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    m: np.ndarray = Field(..., description="(H, W) mask values")

    @field_validator("m", mode="before")
    @classmethod
    def _values(cls, value: object) -> np.ndarray:
        array = require_finite(as_array(value, "m", ndim=2), "m")
        if array.size and (array.min() < 0.0 or array.max() > 1.0):
            raise ValueError("occlusion mask values must lie in [0, 1]")
        return array

    @classmethod
    def full(cls, height: int, width: int, value: float = 1.0) -> "OcclusionMask":
        return cls(m=np.full((height, width), value))


class RenderState(BaseModel):
    """Everything a render call saves for its backward pass."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    image: RenderedImage
    fragments: FragmentBuffer
    projection: ProjectionParams
    light: SHLighting
    shape: VertexShape
    shape_uv: Optional[UVShapeMap] = None
    albedo: UVAlbedoMap
    lookup: UVLookup
    rotation: np.ndarray
    vertex_normals: np.ndarray
    normal_sums: np.ndarray
    normals_uv: UVNormalMap
    texture: UVTextureMap
    projected: ProjectedVertices
    pixel_index: np.ndarray
    pixel_uv: np.ndarray


class RenderGradients(BaseModel):
    """Gradients of a scalar loss with respect to the render inputs."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    vertices: np.ndarray = Field(..., description="(Q, 3)")
    projection: np.ndarray = Field(..., description="(6,) in ProjectionParams.ORDER")
    albedo: np.ndarray = Field(..., description="(U, V, 3)")
    light: np.ndarray = Field(..., description="(3, 9)")
    shape_uv: Optional[np.ndarray] = Field(
        None, description="(U, V, 3) if rendered from S^uv"
    )
