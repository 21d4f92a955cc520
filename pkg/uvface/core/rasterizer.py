"""Z-buffer rasterizer, the differentiable rendering layer and its helpers."""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ShapeMismatchError, StateMismatchError
from ..models.camera import ProjectedVertices, ProjectionParams
from ..models.lighting import SHLighting
from ..models.mesh import (
    Topology,
    UVAlbedoMap,
    UVLookup,
    UVShapeMap,
    UVTextureMap,
    VertexShape,
)
from ..models.render import (
    FragmentBuffer,
    OcclusionMask,
    RenderedImage,
    RenderGradients,
    RenderState,
)
from .camera import (
    project,
    project_backward,
    rotation_backward,
    rotation_from_angles,
)
from .lighting import shade, shade_backward, uv_normal_map, uv_normal_map_backward
from .mesh_core import (
    cover_grid,
    first_per_cell,
    sample_uv,
    sample_uv_backward,
    shape_from_uv,
    uv_lookup,
    vertex_normals,
    vertex_normals_backward,
    vertex_to_uv,
)

logger = logging.getLogger(__name__)

PIXEL_CENTER = 0.5

ShapeInput = Union[VertexShape, UVShapeMap]
ImageLike = Union[RenderedImage, np.ndarray]


def rasterize(
    projected: ProjectedVertices, topo: Topology, width: int, height: int
) -> FragmentBuffer:
    """
    Z-buffer rasterization of the projected mesh.

    Pixel (col, row) is sampled at (col + 0.5, row + 0.5). Edge ties follow the
    top-left rule; depth ties go to the lowest triangle index.
    """
    if width <= 0 or height <= 0:
        raise ValueError(f"image size must be positive, got {width}x{height}")
    tri, flat, bary = cover_grid(
        projected.coords, topo.triangles, width, height, PIXEL_CENTER
    )
    z = projected.depth[topo.triangles[tri]]
    depth = bary[:, 0] * z[:, 0] + bary[:, 1] * z[:, 1] + bary[:, 2] * z[:, 2]
    keep = first_per_cell(flat, depth, tri)

    tri_id = np.full(height * width, -1, dtype=np.int64)
    weights = np.zeros((height * width, 3))
    zbuf = np.zeros(height * width)
    tri_id[flat[keep]] = tri[keep]
    weights[flat[keep]] = bary[keep]
    zbuf[flat[keep]] = depth[keep]
    logger.debug("rasterized %d candidates into %d pixels", tri.size, keep.size)
    return FragmentBuffer(
        tri_id=tri_id.reshape(height, width),
        bary=weights.reshape(height, width, 3),
        depth=zbuf.reshape(height, width),
    )


def refragment(
    projected: ProjectedVertices, topo: Topology, tri_id: np.ndarray
) -> FragmentBuffer:
    """Recompute barycentrics and depth for a frozen pixel-to-triangle map."""
    tri_id = np.asarray(tri_id, dtype=np.int64)
    height, width = tri_id.shape
    covered = np.flatnonzero(tri_id.reshape(-1) >= 0)
    rows, cols = np.divmod(covered, width)
    tri = tri_id.reshape(-1)[covered]
    corners = projected.coords[topo.triangles[tri]]
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    px, py = cols + PIXEL_CENTER, rows + PIXEL_CENTER

    def cross(u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]

    p = np.stack([px, py], axis=1)
    area = cross(b - a, c - a)
    bary = np.stack([cross(b - p, c - p), cross(c - p, a - p), cross(a - p, b - p)], 1)
    bary /= area[:, None]
    z = projected.depth[topo.triangles[tri]]
    weights = np.zeros((height * width, 3))
    zbuf = np.zeros(height * width)
    weights[covered] = bary
    zbuf[covered] = np.sum(bary * z, axis=1)
    # pixels may now lie slightly outside their frozen triangle, so the weights
    # are extrapolated and skip the non-negativity check
    return FragmentBuffer.model_construct(
        tri_id=tri_id,
        bary=weights.reshape(height, width, 3),
        depth=zbuf.reshape(height, width),
    )


def _rgb(image: ImageLike) -> np.ndarray:
    if isinstance(image, RenderedImage):
        return image.rgb
    return np.asarray(image, dtype=np.float64)


def composite_with_mask(
    rendered: ImageLike, target: ImageLike, mask: OcclusionMask
) -> np.ndarray:
    """Occlusion-aware blend: rendered * M + target * (1 - M)."""
    rgb, other = _rgb(rendered), _rgb(target)
    if rgb.shape != other.shape or rgb.shape[:2] != mask.m.shape:
        raise ShapeMismatchError(
            f"cannot composite {rgb.shape} over {other.shape} with mask {mask.m.shape}"
        )
    m = mask.m[..., None]
    return rgb * m + other * (1.0 - m)


def composite_backward(
    mask: OcclusionMask, upstream: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Gradients of the blend w.r.t. (rendered image, target image)."""
    m = mask.m[..., None]
    return upstream * m, upstream * (1.0 - m)


def _cross_perp(x: np.ndarray) -> np.ndarray:
    """d cross(x, y) / dy is -perp(x); d cross(x, y) / dx is perp(y)."""
    return np.stack([x[:, 1], -x[:, 0]], axis=1)


class Renderer:
    """
    Rendering layer R(m, L, S, A) for one topology and image size.

    The UV lookup of the topology is computed once and reused by every call.
    """

    def __init__(
        self,
        topo: Topology,
        width: int,
        height: int,
        background: Sequence[float] = (0.0, 0.0, 0.0),
        lookup: Optional[UVLookup] = None,
    ):
        if width <= 0 or height <= 0:
            raise ValueError(f"image size must be positive, got {width}x{height}")
        self.topo = topo
        self.width = int(width)
        self.height = int(height)
        self.background = np.asarray(background, dtype=np.float64).reshape(3)
        self.lookup = lookup if lookup is not None else uv_lookup(topo)

    @property
    def uv_mask(self) -> np.ndarray:
        return self.lookup.mask

    def _vertex_shape(
        self, shape: ShapeInput
    ) -> Tuple[VertexShape, Optional[UVShapeMap]]:
        if isinstance(shape, UVShapeMap):
            return shape_from_uv(shape, self.topo), shape
        if shape.num_vertices != self.topo.num_vertices:
            raise ShapeMismatchError(
                f"shape has {shape.num_vertices} vertices, "
                f"topology {self.topo.num_vertices}"
            )
        return shape, None

    def _pixel_uv(self, fragments: FragmentBuffer) -> Tuple[np.ndarray, np.ndarray]:
        pixel_index = np.flatnonzero(fragments.coverage.reshape(-1))
        tri = fragments.tri_id.reshape(-1)[pixel_index]
        bary = fragments.bary.reshape(-1, 3)[pixel_index]
        uv = self.topo.uv_coords[self.topo.triangles[tri]]
        points = np.einsum("ki,kij->kj", bary, uv)
        # absorbs rounding of the convex combination at the grid border
        upper = np.array(self.topo.uv_shape, dtype=np.float64) - 1.0
        return pixel_index, np.clip(points, 0.0, upper)

    def _compose(
        self, texture: np.ndarray, fragments: FragmentBuffer
    ) -> Tuple[RenderedImage, np.ndarray, np.ndarray]:
        pixel_index, pixel_uv = self._pixel_uv(fragments)
        rgb = np.tile(self.background, (self.height * self.width, 1))
        if pixel_index.size:
            rgb[pixel_index] = sample_uv(texture, pixel_uv)
        image = RenderedImage(
            rgb=rgb.reshape(self.height, self.width, 3), coverage=fragments.coverage
        )
        return image, pixel_index, pixel_uv

    def _fragments(
        self, projected: ProjectedVertices, tri_id: Optional[np.ndarray]
    ) -> FragmentBuffer:
        if tri_id is None:
            return rasterize(projected, self.topo, self.width, self.height)
        if tuple(np.shape(tri_id)) != (self.height, self.width):
            raise ShapeMismatchError(
                "frozen coverage map does not match the image size"
            )
        return refragment(projected, self.topo, tri_id)

    def render(
        self,
        m: ProjectionParams,
        light: SHLighting,
        shape: ShapeInput,
        albedo: UVAlbedoMap,
        tri_id: Optional[np.ndarray] = None,
    ) -> RenderState:
        """
        Forward pass.

        Args:
            m: Projection parameters
            light: SH lighting
            shape: Vertex shape or S^uv
            albedo: UV albedo map
            tri_id: Optional frozen pixel-to-triangle map from an earlier render

        Returns:
            RenderState holding the image and every saved intermediate
        """
        vertices, shape_uv = self._vertex_shape(shape)
        rotation = rotation_from_angles(*m.angles)
        normals = vertex_normals(vertices, self.topo)
        normals_uv, sums = uv_normal_map(normals @ rotation.T, self.topo, self.lookup)
        texture = shade(albedo, normals_uv, light)
        projected = project(vertices, m)
        fragments = self._fragments(projected, tri_id)
        image, pixel_index, pixel_uv = self._compose(texture.data, fragments)
        return RenderState(
            image=image,
            fragments=fragments,
            projection=m,
            light=light,
            shape=vertices,
            shape_uv=shape_uv,
            albedo=albedo,
            lookup=self.lookup,
            rotation=rotation,
            vertex_normals=normals,
            normal_sums=sums,
            normals_uv=normals_uv,
            texture=texture,
            projected=projected,
            pixel_index=pixel_index,
            pixel_uv=pixel_uv,
        )

    def render_texture(
        self,
        m: ProjectionParams,
        shape: ShapeInput,
        texture: UVTextureMap,
        tri_id: Optional[np.ndarray] = None,
    ) -> Tuple[RenderedImage, FragmentBuffer]:
        """Rasterize the mesh and sample an already shaded UV texture."""
        vertices, _ = self._vertex_shape(shape)
        fragments = self._fragments(project(vertices, m), tri_id)
        image, _, _ = self._compose(texture.data, fragments)
        return image, fragments

    def backward(
        self,
        state: RenderState,
        upstream: np.ndarray,
        texture_grad: Optional[np.ndarray] = None,
    ) -> RenderGradients:
        """
        Backward pass with the pixel-to-triangle assignment held fixed.

        Args:
            state: RenderState returned by render on this renderer
            upstream: (H, W, 3) gradient of the loss w.r.t. the rendered image
            texture_grad: Optional gradient w.r.t. the shaded UV texture T^uv

        Returns:
            RenderGradients for vertices, projection, albedo, light and S^uv
        """
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape != state.image.rgb.shape:
            raise StateMismatchError(
                f"upstream gradient {upstream.shape} does not match the render "
                f"{state.image.rgb.shape}"
            )
        if (
            state.shape.num_vertices != self.topo.num_vertices
            or state.lookup.shape != self.lookup.shape
        ):
            raise StateMismatchError("render state belongs to another topology")
        if texture_grad is not None and (
            np.shape(texture_grad) != state.texture.data.shape
        ):
            raise StateMismatchError("texture gradient does not match the UV texture")

        topo = self.topo
        texture = state.texture.data
        grad_colors = upstream.reshape(-1, 3)[state.pixel_index]
        grad_texture, grad_points = sample_uv_backward(
            texture, state.pixel_uv, grad_colors
        )
        if texture_grad is not None:
            grad_texture = grad_texture + np.asarray(texture_grad, dtype=np.float64)

        # pixel UV point -> barycentrics -> projected vertex coordinates
        tri = state.fragments.tri_id.reshape(-1)[state.pixel_index]
        bary = state.fragments.bary.reshape(-1, 3)[state.pixel_index]
        corners = topo.triangles[tri]
        grad_bary = np.einsum("kj,kij->ki", grad_points, topo.uv_coords[corners])
        grad_coords = self._bary_backward(state, corners, bary, grad_bary)

        grad_vertices, grad_m = project_backward(
            state.shape, state.projection, grad_coords
        )

        grad_albedo, grad_light, grad_normals_uv = shade_backward(
            state.albedo, state.normals_uv, state.light, grad_texture
        )
        grad_rotated = uv_normal_map_backward(
            state.normal_sums, grad_normals_uv, topo, self.lookup
        )
        rotation = state.rotation
        grad_normals = grad_rotated @ rotation
        grad_m[1:4] += rotation_backward(
            state.projection.angles, grad_rotated.T @ state.vertex_normals
        )
        grad_vertices += vertex_normals_backward(state.shape, topo, grad_normals)

        grad_shape_uv = None
        if state.shape_uv is not None:
            grad_shape_uv, _ = sample_uv_backward(
                state.shape_uv, topo.uv_coords, grad_vertices
            )
        return RenderGradients(
            vertices=grad_vertices,
            projection=grad_m,
            albedo=grad_albedo,
            light=grad_light,
            shape_uv=grad_shape_uv,
        )

    def _bary_backward(
        self,
        state: RenderState,
        corners: np.ndarray,
        bary: np.ndarray,
        grad_bary: np.ndarray,
    ) -> np.ndarray:
        coords = state.projected.coords
        rows, cols = np.divmod(state.pixel_index, self.width)
        p = np.stack([cols + PIXEL_CENTER, rows + PIXEL_CENTER], axis=1)
        a, b, c = coords[corners[:, 0]], coords[corners[:, 1]], coords[corners[:, 2]]
        area = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
            c[:, 0] - a[:, 0]
        )
        # lambda_i = w_i / area, w0 = (b-p)x(c-p), w1 = (c-p)x(a-p), w2 = (a-p)x(b-p)
        g_w = grad_bary / area[:, None]
        g_area = -np.sum(grad_bary * bary, axis=1) / area
        g0, g1, g2, ga = g_w[:, :1], g_w[:, 1:2], g_w[:, 2:], g_area[:, None]
        perp = _cross_perp
        grad_a = (
            -g1 * perp(c - p)
            + g2 * perp(b - p)
            + ga * (perp(b - a) - perp(c - a))
        )
        grad_b = g0 * perp(c - p) - g2 * perp(a - p) + ga * perp(c - a)
        grad_c = -g0 * perp(b - p) + g1 * perp(a - p) - ga * perp(b - a)

        grad_coords = np.zeros_like(coords)
        np.add.at(grad_coords, corners[:, 0], grad_a)
        np.add.at(grad_coords, corners[:, 1], grad_b)
        np.add.at(grad_coords, corners[:, 2], grad_c)
        return grad_coords

    def unwarp(
        self,
        image: ImageLike,
        shape: ShapeInput,
        m: ProjectionParams,
        coverage: Optional[np.ndarray] = None,
    ) -> Tuple[UVTextureMap, np.ndarray]:
        """
        Refer every face texel back to the input image.

        A texel is valid when its rotated normal faces the camera, its projection
        lands inside the image and, if a coverage map is given, all four bilinear
        taps are covered pixels.

        Returns:
            (pseudo texture with the validity mask, the validity mask)
        """
        rgb = _rgb(image)
        height, width = rgb.shape[:2]
        vertices, _ = self._vertex_shape(shape)
        mask = self.lookup.mask
        rotation = rotation_from_angles(*m.angles)

        points = vertex_to_uv(vertices.positions, self.topo, self.lookup)[mask]
        normals = vertex_normals(vertices, self.topo)
        normals_uv, _ = uv_normal_map(normals @ rotation.T, self.topo, self.lookup)
        facing = normals_uv.data[mask][:, 2] < 0.0

        rotated = points @ rotation.T
        xy = m.f * rotated[:, :2] + m.t2d
        # image arrays are indexed (row, col) with pixel centres at +0.5
        samples = np.stack([xy[:, 1] - PIXEL_CENTER, xy[:, 0] - PIXEL_CENTER], axis=1)
        inside = (
            (samples[:, 0] >= 0)
            & (samples[:, 0] <= height - 1)
            & (samples[:, 1] >= 0)
            & (samples[:, 1] <= width - 1)
        )
        valid = facing & inside
        if coverage is not None:
            cov = np.asarray(coverage, dtype=bool)
            idx = np.flatnonzero(valid)
            r0 = np.floor(samples[idx, 0]).astype(np.int64)
            c0 = np.floor(samples[idx, 1]).astype(np.int64)
            r1 = np.minimum(r0 + 1, height - 1)
            c1 = np.minimum(c0 + 1, width - 1)
            taps = cov[r0, c0] & cov[r1, c0] & cov[r0, c1] & cov[r1, c1]
            valid[idx] = taps

        values = np.zeros((points.shape[0], 3))
        if np.any(valid):
            values[valid] = sample_uv(rgb, samples[valid])
        data = np.zeros(self.lookup.shape + (3,))
        data[mask] = values
        texel_valid = np.zeros(self.lookup.shape, dtype=bool)
        texel_valid[mask] = valid
        logger.debug("unwarp kept %d of %d face texels", int(valid.sum()), valid.size)
        return UVTextureMap(data=data, mask=texel_valid), texel_valid


def render(
    m: ProjectionParams,
    light: SHLighting,
    shape: ShapeInput,
    albedo: UVAlbedoMap,
    topo: Topology,
    width: int,
    height: int,
    background: Sequence[float] = (0.0, 0.0, 0.0),
) -> Tuple[RenderedImage, FragmentBuffer]:
    """Render the face; returns the image and its fragment buffer."""
    state = Renderer(topo, width, height, background).render(m, light, shape, albedo)
    return state.image, state.fragments


def render_texture(
    m: ProjectionParams,
    shape: ShapeInput,
    texture: UVTextureMap,
    topo: Topology,
    width: int,
    height: int,
    background: Sequence[float] = (0.0, 0.0, 0.0),
) -> Tuple[RenderedImage, FragmentBuffer]:
    """Rasterize the mesh with a pre-shaded texture."""
    return Renderer(topo, width, height, background).render_texture(m, shape, texture)


def render_backward(
    state: RenderState, upstream: np.ndarray, topo: Topology
) -> RenderGradients:
    """Backward pass of render for a saved RenderState."""
    height, width = state.image.size
    renderer = Renderer(topo, width, height, lookup=state.lookup)
    return renderer.backward(state, upstream)


def unwarp_to_uv(
    image: ImageLike,
    shape: ShapeInput,
    m: ProjectionParams,
    topo: Topology,
    coverage: Optional[np.ndarray] = None,
) -> Tuple[UVTextureMap, np.ndarray]:
    """Pseudo ground-truth texture by referring UV texels back to the image."""
    rgb = _rgb(image)
    renderer = Renderer(topo, rgb.shape[1], rgb.shape[0])
    return renderer.unwarp(rgb, shape, m, coverage)
