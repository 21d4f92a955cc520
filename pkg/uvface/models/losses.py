"""Loss-related data models."""

from typing import Dict

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .arrays import as_array
from .camera import ProjectionParams
from .mesh import NUM_LANDMARKS, UVTextureMap, VertexShape


class LossWeights(BaseModel):
    """
    Weights of the total objective and the intermediate objective.

    Defaults come from the bundled 64 x 64 synthetic face with the camera
    0.1 rad, 5% and 4 px off. There recon_image is about 0.1 and the landmark
    term about 2.5e3 px^2, so lambda_L = 1e-4 puts them within a factor of
    three. At the true parameters symmetry and constancy sum to a few hundred
    and their gradient on f_A is a few hundred per unit, against a slope of
    about 0.03 for recon_image; lambda_reg = 1e-5 keeps the weighted pull an
    order of magnitude below that slope, so an exact reconstruction stays a
    minimum of the total.
    """

    model_config = ConfigDict(frozen=True)

    lambda_L: float = Field(1e-4, ge=0, description="Landmark weight")
    lambda_reg: float = Field(1e-5, ge=0, description="Regulariser weight")
    lambda_f: float = Field(0.0, ge=0, description="Feature reconstruction weight")
    lambda_T: float = Field(1.0, ge=0, description="Texture weight in L0")
    lambda_m: float = Field(1.0, ge=0, description="Projection weight in L0")
    lambda_L0: float = Field(1e-4, ge=0, description="Landmark weight in L0")
    lambda_reg0: float = Field(1e-5, ge=0, description="Regulariser weight in L0")
    w_sym: float = Field(1.0, ge=0, description="Albedo symmetry sub-weight")
    w_const: float = Field(1.0, ge=0, description="Albedo constancy sub-weight")
    w_smooth: float = Field(1.0, ge=0, description="Shape smoothness sub-weight")
    alpha: float = Field(15.0, ge=0, description="Chromaticity sharpness")
    p: float = Field(0.8, gt=0, le=1, description="Constancy exponent")

    def weight_for(self, name: str, intermediate: bool = False) -> float:
        """Weight applied to a named loss part in the total objective."""
        lambda_l = self.lambda_L0 if intermediate else self.lambda_L
        lambda_reg = self.lambda_reg0 if intermediate else self.lambda_reg
        table = {
            "recon_image": 1.0,
            "recon_feature": self.lambda_f,
            "landmark": lambda_l,
            "symmetry": lambda_reg * self.w_sym,
            "constancy": lambda_reg * self.w_const,
            "smoothness": lambda_reg * self.w_smooth,
            "intermediate": 1.0,
        }
        if name not in table:
            raise KeyError(f"unknown loss part '{name}'")
        return table[name]


class LandmarkSet(BaseModel):
    """68 annotated 2D landmarks U with visibility flags."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    points: np.ndarray = Field(..., description="(68, 2) image coordinates")
    visible: np.ndarray = Field(
        default_factory=lambda: np.ones(NUM_LANDMARKS, dtype=bool),
        description="(68,) visibility",
    )

    @field_validator("points", mode="before")
    @classmethod
    def _points(cls, value: object) -> np.ndarray:
        array = as_array(value, "points")
        if array.shape == (2, NUM_LANDMARKS):
            array = array.T
        if array.shape != (NUM_LANDMARKS, 2):
            raise ValueError(f"landmarks must be 68 x 2, got {array.shape}")
        return array

    @field_validator("visible", mode="before")
    @classmethod
    def _visible(cls, value: object) -> np.ndarray:
        array = as_array(value, "visible", dtype=bool, ndim=1)
        if array.shape != (NUM_LANDMARKS,):
            raise ValueError("visibility must have 68 flags")
        return array

    @model_validator(mode="after")
    def _check(self) -> "LandmarkSet":
        if not np.all(np.isfinite(self.points[self.visible])):
            raise ValueError("visible landmarks must be finite")
        return self

    @property
    def num_visible(self) -> int:
        return int(np.count_nonzero(self.visible))


class PseudoGroundTruth(BaseModel):
    """Fitted shape, projection and unwarped texture used by the intermediate loss."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    shape: VertexShape
    projection: ProjectionParams
    texture: UVTextureMap

    @property
    def valid(self) -> np.ndarray:
        return self.texture.mask


class LossPart(BaseModel):
    """One named term of an objective with its gradients per parameter block."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    value: float
    grads: Dict[str, np.ndarray] = Field(default_factory=dict)
    enabled: bool = True
