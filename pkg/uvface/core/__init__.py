"""Differentiable rendering core for uvface."""

from .camera import project, project_backward, rotation_from_angles
from .lighting import sh_basis, shade, shade_backward, shading
from .mesh_core import (
    cylindrical_unwrap,
    sample_uv,
    sample_uv_backward,
    shape_from_uv,
    uv_lookup,
    vertex_normals,
)
from .rasterizer import (
    Renderer,
    composite_with_mask,
    rasterize,
    render,
    render_backward,
    unwarp_to_uv,
)

__all__ = [
    "Renderer",
    "composite_with_mask",
    "cylindrical_unwrap",
    "project",
    "project_backward",
    "rasterize",
    "render",
    "render_backward",
    "rotation_from_angles",
    "sample_uv",
    "sample_uv_backward",
    "sh_basis",
    "shade",
    "shade_backward",
    "shading",
    "shape_from_uv",
    "unwarp_to_uv",
    "uv_lookup",
    "vertex_normals",
]
