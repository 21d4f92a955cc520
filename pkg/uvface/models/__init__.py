"""Data models for uvface."""

from .camera import ProjectedVertices, ProjectionParams
from .fitting import FitConfig, FitResult, ParamFile
from .lighting import SHLighting
from .losses import LandmarkSet, LossPart, LossWeights, PseudoGroundTruth
from .morphable import LinearModel, MorphableModel
from .mesh import (
    NUM_LANDMARKS,
    Topology,
    UnwrapConstants,
    UVAlbedoMap,
    UVLookup,
    UVMap,
    UVNormalMap,
    UVShadingMap,
    UVShapeMap,
    UVTextureMap,
    VertexShape,
)
from .render import (
    FragmentBuffer,
    OcclusionMask,
    RenderedImage,
    RenderGradients,
    RenderState,
)

__all__ = [
    "NUM_LANDMARKS",
    "FitConfig",
    "FitResult",
    "FragmentBuffer",
    "LandmarkSet",
    "LossPart",
    "LinearModel",
    "LossWeights",
    "MorphableModel",
    "OcclusionMask",
    "ParamFile",
    "ProjectedVertices",
    "ProjectionParams",
    "PseudoGroundTruth",
    "RenderGradients",
    "RenderState",
    "RenderedImage",
    "SHLighting",
    "Topology",
    "UVAlbedoMap",
    "UVLookup",
    "UVMap",
    "UVNormalMap",
    "UVShadingMap",
    "UVShapeMap",
    "UVTextureMap",
    "UnwrapConstants",
    "VertexShape",
]
