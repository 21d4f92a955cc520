"""Morphable-model decoders and analysis-by-synthesis fitting."""

from .decoders import Decoder, TwoLayerDecoder, linear_decode, truncate
from .fitter import (
    bbox_size,
    decode_albedo,
    fit_albedo_lighting,
    fit_image,
    fit_shape,
    initial_projection,
    inter_ocular_distance,
    landmark_nme,
    neutral_light,
    nme,
    pseudo_ground_truth,
    relight,
    relight_texture,
)
from .optimizer import GradientDescent

__all__ = [
    "Decoder",
    "GradientDescent",
    "TwoLayerDecoder",
    "bbox_size",
    "decode_albedo",
    "fit_albedo_lighting",
    "fit_image",
    "fit_shape",
    "initial_projection",
    "inter_ocular_distance",
    "landmark_nme",
    "linear_decode",
    "neutral_light",
    "nme",
    "pseudo_ground_truth",
    "relight",
    "relight_texture",
    "truncate",
]
