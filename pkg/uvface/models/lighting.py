"""Spherical-harmonics lighting model."""

from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .arrays import as_array, require_finite

NUM_CHANNELS = 3
NUM_SH = 9
# value of the band-0 basis function, 1 / (2 sqrt(pi))
SH_C0 = 0.28209479177387814


class SHLighting(BaseModel):
    """27 SH coefficients L: 3 colour channels x 9 basis functions."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    coeffs: np.ndarray = Field(..., description="(3, 9) channel-major coefficients")

    @field_validator("coeffs", mode="before")
    @classmethod
    def _coeffs(cls, value: object) -> np.ndarray:
        array = as_array(value, "coeffs")
        if array.size != NUM_CHANNELS * NUM_SH:
            raise ValueError(f"SH lighting needs 27 coefficients, got {array.size}")
        return require_finite(array.reshape(NUM_CHANNELS, NUM_SH), "coeffs")

    @classmethod
    def ambient(cls, level: float) -> "SHLighting":
        """Band-0 only lighting with the same coefficient on all channels."""
        coeffs = np.zeros((NUM_CHANNELS, NUM_SH))
        coeffs[:, 0] = level
        return cls(coeffs=coeffs)

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> "SHLighting":
        return cls(coeffs=np.asarray(vector, dtype=np.float64))

    def to_vector(self) -> np.ndarray:
        """Channel-major, band-minor flattening."""
        return self.coeffs.reshape(-1).copy()
