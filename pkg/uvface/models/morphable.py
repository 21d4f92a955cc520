"""Linear morphable-model containers."""

from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..errors import ConsistencyError, ShapeMismatchError
from .arrays import as_array, require_finite
from .mesh import Topology, UnwrapConstants


class LinearModel(BaseModel):
    """PCA model: mean vector plus a basis matrix with one column per parameter."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mean: np.ndarray = Field(..., description="(N,) mean vector")
    bases: np.ndarray = Field(..., description="(N, param_dim) basis columns")

    @field_validator("mean", mode="before")
    @classmethod
    def _mean(cls, value: object) -> np.ndarray:
        return require_finite(as_array(value, "mean", ndim=1), "mean")

    @field_validator("bases", mode="before")
    @classmethod
    def _bases(cls, value: object) -> np.ndarray:
        return require_finite(as_array(value, "bases", ndim=2), "bases")

    @model_validator(mode="after")
    def _check(self) -> "LinearModel":
        if self.bases.shape[0] != self.mean.shape[0]:
            raise ValueError(
                f"bases have {self.bases.shape[0]} rows but the mean has "
                f"{self.mean.shape[0]} entries"
            )
        return self

    @property
    def param_dim(self) -> int:
        return int(self.bases.shape[1])

    @property
    def output_dim(self) -> int:
        return int(self.mean.shape[0])

    def decode(self, params: np.ndarray) -> np.ndarray:
        """mean + bases @ params."""
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.param_dim,):
            raise ShapeMismatchError(
                f"expected {self.param_dim} parameters, got shape {params.shape}"
            )
        return self.mean + self.bases @ params

    def decode_backward(self, params: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        return self.bases.T @ np.asarray(upstream, dtype=np.float64).reshape(-1)

    def truncate(self, k: int) -> "LinearModel":
        """Keep the first k basis columns."""
        if not 0 <= k <= self.param_dim:
            raise ValueError(f"cannot keep {k} of {self.param_dim} bases")
        return LinearModel(mean=self.mean, bases=self.bases[:, :k])


class MorphableModel(BaseModel):
    """Topology plus linear shape and albedo models, as stored in a model file."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    topology: Topology
    shape_model: LinearModel
    albedo_model: LinearModel
    unwrap: UnwrapConstants

    @model_validator(mode="after")
    def _check(self) -> "MorphableModel":
        expected = 3 * self.topology.num_vertices
        for name, model in (("shape", self.shape_model), ("albedo", self.albedo_model)):
            if model.output_dim != expected:
                raise ConsistencyError(
                    f"{name} basis has {model.output_dim} rows but 3Q = {expected}"
                )
        return self

    @property
    def dims(self) -> Tuple[int, int, int, int, int]:
        """(Q, U, V, l_S, l_A)."""
        u, v = self.topology.uv_shape
        return (
            self.topology.num_vertices,
            u,
            v,
            self.shape_model.param_dim,
            self.albedo_model.param_dim,
        )

    def truncate(self, l_s: int, l_a: int) -> "MorphableModel":
        return MorphableModel(
            topology=self.topology,
            shape_model=self.shape_model.truncate(l_s),
            albedo_model=self.albedo_model.truncate(l_a),
            unwrap=self.unwrap,
        )
