"""Analysis-by-synthesis fitting, evaluation metrics and relighting."""

import logging
import math
from typing import Dict, List, Literal, Optional, Sequence, Set, Tuple

import numpy as np

from ..core.camera import project, rotation_from_angles
from ..core.lighting import shade, shade_backward, shading, uv_normal_map
from ..core.losses import (
    FeatureExtractor,
    albedo_constancy_loss,
    albedo_symmetry_loss,
    breakdown,
    intermediate_loss,
    landmark_loss,
    perceptual_loss,
    recon_image_loss,
    shape_smoothness_loss,
    total_loss,
)
from ..core.mesh_core import (
    shape_to_uv,
    uv_lookup,
    vertex_normals,
    vertex_normals_backward,
    vertex_to_uv,
    vertex_to_uv_backward,
)
from ..core.rasterizer import (
    Renderer,
    composite_backward,
    composite_with_mask,
    rasterize,
)
from ..errors import DomainError, EmptyCoverageError, ShapeMismatchError
from ..models.camera import ProjectionParams
from ..models.fitting import FitConfig, FitResult
from ..models.lighting import SH_C0, SHLighting
from ..models.losses import LandmarkSet, LossPart, PseudoGroundTruth
from ..models.mesh import (
    Topology,
    UVAlbedoMap,
    UVLookup,
    UVNormalMap,
    UVTextureMap,
    VertexShape,
)
from ..models.render import OcclusionMask, RenderedImage
from .decoders import Decoder
from .optimizer import Blocks, DescentResult, GradientDescent

logger = logging.getLogger(__name__)

# outer eye corners in the 68-point annotation order
LANDMARK_EYE_CORNERS = (36, 45)
# shading magnitude below which a texel is not relit
SHADING_GUARD = 1e-6
# pitch of an upright frontal view (model y-up, image y-down)
FRONTAL_PITCH = math.pi
# fraction of the shorter image side the face spans without landmarks
DEFAULT_FILL = 0.6

Metric = Literal["interocular", "bbox"]


def neutral_light() -> SHLighting:
    """Ambient lighting with unit shading on every channel."""
    return SHLighting.ambient(1.0 / SH_C0)


def nme(pred: np.ndarray, gt: np.ndarray, normalizer: float) -> float:
    """Mean per-point Euclidean error divided by normalizer."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeMismatchError(f"point sets differ: {pred.shape} vs {gt.shape}")
    if not np.isfinite(normalizer) or normalizer <= 0:
        raise DomainError(f"NME normalizer must be positive, got {normalizer}")
    return float(np.mean(np.linalg.norm(pred - gt, axis=-1)) / normalizer)


def inter_ocular_distance(points: np.ndarray, corners: Sequence[int]) -> float:
    """Distance between the two outer eye corners of a 2D or 3D point set."""
    points = np.asarray(points, dtype=np.float64)
    return float(np.linalg.norm(points[corners[0]] - points[corners[1]]))


def bbox_size(points: np.ndarray) -> float:
    """sqrt(width * height) of the x/y bounding box."""
    points = np.asarray(points, dtype=np.float64)
    extent = points[:, :2].max(axis=0) - points[:, :2].min(axis=0)
    return float(np.sqrt(extent[0] * extent[1]))


def landmark_nme(
    m: ProjectionParams,
    shape: VertexShape,
    topo: Topology,
    gt: LandmarkSet,
    metric: Metric = "interocular",
) -> float:
    """2D alignment NME of the projected landmark vertices over visible points."""
    points = shape.positions[topo.landmark_indices] @ rotation_from_angles(*m.angles).T
    pred = m.f * points[:, :2] + m.t2d
    if metric == "bbox":
        normalizer = bbox_size(gt.points[gt.visible])
    else:
        normalizer = inter_ocular_distance(gt.points, LANDMARK_EYE_CORNERS)
    return nme(pred[gt.visible], gt.points[gt.visible], normalizer)


def initial_projection(
    shape: VertexShape,
    topo: Topology,
    width: int,
    height: int,
    landmarks: Optional[LandmarkSet] = None,
) -> ProjectionParams:
    """
    Frontal starting camera for an image fit.

    With landmarks, scale and translation align the frontal projection of the
    landmark vertices to the visible annotations (matching centroid and spread).
    Without them the face is centred and spans DEFAULT_FILL of the image.
    """
    rotated = shape.positions @ rotation_from_angles(FRONTAL_PITCH, 0.0, 0.0).T
    if landmarks is not None and landmarks.num_visible >= 2:
        model = rotated[topo.landmark_indices][landmarks.visible, :2]
        target = landmarks.points[landmarks.visible]
        spread = np.linalg.norm(model - model.mean(axis=0), axis=1).mean()
        if spread > 0:
            radius = np.linalg.norm(target - target.mean(axis=0), axis=1).mean()
            f = float(radius / spread)
            t2d = target.mean(axis=0) - f * model.mean(axis=0)
            return ProjectionParams(
                f=f, pitch=FRONTAL_PITCH, tx=float(t2d[0]), ty=float(t2d[1])
            )
        logger.warning("landmark vertices coincide; falling back to a centred view")
    xy = rotated[:, :2]
    extent = float(np.max(xy.max(axis=0) - xy.min(axis=0)))
    if extent <= 0:
        raise DomainError("shape has no extent in the image plane")
    f = DEFAULT_FILL * min(width, height) / extent
    centre = 0.5 * (xy.max(axis=0) + xy.min(axis=0))
    t2d = np.array([width / 2.0, height / 2.0]) - f * centre
    return ProjectionParams(
        f=f, pitch=FRONTAL_PITCH, tx=float(t2d[0]), ty=float(t2d[1])
    )


def decode_albedo(
    decoder: Decoder, f_a: np.ndarray, topo: Topology, lookup: UVLookup
) -> UVAlbedoMap:
    """Decode per-vertex colours and resample them to the UV grid."""
    colours = decoder.decode(f_a).reshape(-1, 3)
    return UVAlbedoMap(data=vertex_to_uv(colours, topo, lookup), mask=lookup.mask)


def _albedo_backward(
    decoder: Decoder,
    f_a: np.ndarray,
    grad_uv: np.ndarray,
    topo: Topology,
    lookup: UVLookup,
) -> np.ndarray:
    grad_vertex = vertex_to_uv_backward(grad_uv, topo, lookup)
    return decoder.decode_backward(f_a, grad_vertex.reshape(-1))


def _start(dim: int, init: Optional[np.ndarray]) -> np.ndarray:
    return np.zeros(dim) if init is None else np.asarray(init, dtype=np.float64)


def _check_albedo_range(albedo: UVAlbedoMap) -> None:
    if albedo.in_unit_range():
        return
    values = albedo.data[albedo.mask]
    outside = int(np.count_nonzero((values < 0.0) | (values > 1.0)))
    logger.warning("fitted albedo leaves [0, 1] on %d texel channels", outside)


def _to_result(descent: DescentResult) -> FitResult:
    return FitResult(
        trace=descent.trace,
        termination=descent.termination,
        iterations=descent.iterations,
        rejected_steps=descent.rejected_steps,
    )


def fit_albedo_lighting(
    target: UVTextureMap,
    normals_uv: UVNormalMap,
    decoder: Decoder,
    topo: Topology,
    cfg: FitConfig,
    lookup: Optional[UVLookup] = None,
    init_f_a: Optional[np.ndarray] = None,
    init_light: Optional[SHLighting] = None,
) -> FitResult:
    """
    Jointly fit albedo parameters and lighting to a UV texture.

    Minimises the mean absolute texture error over the target's valid texels.
    The returned result's final loss is that residual.
    """
    lookup = lookup or uv_lookup(topo)
    if target.shape != lookup.shape:
        raise ShapeMismatchError(f"target is {target.shape}, UV grid is {lookup.shape}")
    region = target.mask & lookup.mask
    count = 3 * int(region.sum())
    if count == 0:
        raise ValueError("target texture has no valid texel inside the face region")

    def objective(blocks: Blocks) -> Tuple[float, Blocks]:
        light = SHLighting.from_vector(blocks["light"])
        albedo = decode_albedo(decoder, blocks["f_A"], topo, lookup)
        texture = shade(albedo, normals_uv, light)
        diff = np.where(region[..., None], texture.data - target.data, 0.0)
        g_tex = np.sign(diff) / count
        g_albedo, g_light, _ = shade_backward(albedo, normals_uv, light, g_tex)
        grads = {
            "light": g_light.reshape(-1),
            "f_A": _albedo_backward(decoder, blocks["f_A"], g_albedo, topo, lookup),
        }
        return float(np.abs(diff).sum() / count), grads

    params = {
        "light": (init_light or neutral_light()).to_vector(),
        "f_A": (
            np.zeros(decoder.param_dim) if init_f_a is None else np.asarray(init_f_a)
        ),
    }
    scales = {}
    if cfg.fit_lighting:
        scales["light"] = cfg.scale_for("light")
    if cfg.fit_albedo:
        scales["f_A"] = cfg.scale_for("f_A")
    descent = GradientDescent(cfg).minimize(objective, params, scales)
    result = _to_result(descent)
    result.light = SHLighting.from_vector(descent.params["light"])
    result.f_A = descent.params["f_A"].tolist()
    result.breakdown = {"texture_l1": result.final_loss}
    _check_albedo_range(decode_albedo(decoder, descent.params["f_A"], topo, lookup))
    logger.info("texture fit residual %.6g (%s)", result.final_loss, result.termination)
    return result


def fit_shape(
    target: VertexShape,
    decoder: Decoder,
    topo: Topology,
    cfg: FitConfig,
    target_normals: Optional[np.ndarray] = None,
    init_f_s: Optional[np.ndarray] = None,
) -> FitResult:
    """
    Fit shape parameters to a registered scan.

    Minimises mean squared vertex distance plus normal_weight times the mean
    (1 - n . n') over vertices; reports the NME normalised by the target's
    inter-ocular distance.
    """
    if target.num_vertices != topo.num_vertices:
        raise ShapeMismatchError("target scan does not share the model topology")
    q = topo.num_vertices
    weight = cfg.normal_weight
    normals_ref = None
    if weight > 0:
        normals_ref = (
            vertex_normals(target, topo)
            if target_normals is None
            else np.asarray(target_normals, dtype=np.float64)
        )

    def objective(blocks: Blocks) -> Tuple[float, Blocks]:
        positions = decoder.decode(blocks["f_S"]).reshape(-1, 3)
        diff = positions - target.positions
        value = float(np.sum(diff * diff)) / q
        grad = 2.0 * diff / q
        if normals_ref is not None:
            shape = VertexShape(positions=positions)
            normals = vertex_normals(shape, topo)
            agreement = np.sum(normals * normals_ref, axis=1)
            value += weight * float(np.sum(1.0 - agreement)) / q
            grad += vertex_normals_backward(shape, topo, -weight * normals_ref / q)
        return value, {"f_S": decoder.decode_backward(blocks["f_S"], grad.reshape(-1))}

    params = {
        "f_S": np.zeros(decoder.param_dim) if init_f_s is None else np.asarray(init_f_s)
    }
    scales = {"f_S": cfg.scale_for("f_S")} if cfg.fit_shape else {}
    descent = GradientDescent(cfg).minimize(objective, params, scales)
    result = _to_result(descent)
    result.f_S = descent.params["f_S"].tolist()
    fitted = decoder.decode(descent.params["f_S"]).reshape(-1, 3)
    normalizer = inter_ocular_distance(target.positions, topo.eye_corner_indices)
    result.nme = nme(fitted, target.positions, normalizer)
    result.breakdown = {"shape": result.final_loss}
    logger.info("shape fit NME %.6g (%s)", result.nme, result.termination)
    return result


class ImageObjective:
    """
    Total objective of an image fit over the parameter blocks
    f, angles, t2d, light, f_S and f_A.

    ``terms`` selects the active parts: recon, landmark, reg and, when pseudo
    ground truth is given, intermediate. With intermediate active the landmark
    and regulariser weights switch to lambda_L0 and lambda_reg0.
    """

    def __init__(
        self,
        renderer: Renderer,
        image: np.ndarray,
        mask: OcclusionMask,
        landmarks: Optional[LandmarkSet],
        shape_decoder: Decoder,
        albedo_decoder: Decoder,
        cfg: FitConfig,
        fx: Optional[FeatureExtractor] = None,
        pseudo: Optional[PseudoGroundTruth] = None,
    ):
        self.renderer = renderer
        self.topo = renderer.topo
        self.lookup = renderer.lookup
        self.image = np.asarray(image, dtype=np.float64)
        self.mask = mask
        self.landmarks = landmarks
        self.shape_decoder = shape_decoder
        self.albedo_decoder = albedo_decoder
        self.cfg = cfg
        self.weights = cfg.weights
        self.fx = fx
        self.pseudo = pseudo
        self.terms: Set[str] = {"recon", "landmark", "reg"}
        self.chroma: Optional[UVTextureMap] = None

    @staticmethod
    def projection(blocks: Blocks) -> ProjectionParams:
        return ProjectionParams.from_vector(
            np.concatenate([blocks["f"], blocks["angles"], blocks["t2d"]])
        )

    def refresh_chroma(self, blocks: Blocks) -> None:
        """Reference the input colours through the current projection."""
        shape = VertexShape.from_flat(self.shape_decoder.decode(blocks["f_S"]))
        projection = self.projection(blocks)
        self.chroma, _ = self.renderer.unwarp(self.image, shape, projection)

    def parts(self, blocks: Blocks) -> Tuple[List[LossPart], Dict[str, object]]:
        """Evaluate every active loss part; returns the parts and decoded state."""
        weights = self.weights
        m = self.projection(blocks)
        shape = VertexShape.from_flat(self.shape_decoder.decode(blocks["f_S"]))
        albedo = decode_albedo(
            self.albedo_decoder, blocks["f_A"], self.topo, self.lookup
        )
        light = SHLighting.from_vector(blocks["light"])
        parts: List[LossPart] = []
        state = None
        pseudo = self.pseudo if "intermediate" in self.terms else None
        if "recon" in self.terms or pseudo is not None:
            state = self.renderer.render(m, light, shape, albedo)

        if "recon" in self.terms:
            composite = composite_with_mask(state.image, self.image, self.mask)
            value, grad = recon_image_loss(composite, self.image, state.image.coverage)
            parts.append(
                LossPart(name="recon_image", value=value, grads={"image": grad})
            )
            feature, g_feature, enabled = perceptual_loss(
                self.fx, composite, self.image
            )
            parts.append(
                LossPart(
                    name="recon_feature",
                    value=feature,
                    grads={"image": g_feature},
                    enabled=enabled and weights.lambda_f > 0,
                )
            )

        if pseudo is not None and state is not None:
            value, grads = intermediate_loss(shape, state.texture, m, pseudo, weights)
            parts.append(
                LossPart(
                    name="intermediate",
                    value=value,
                    grads={
                        "vertices": grads["shape"],
                        "texture": grads["texture"],
                        "projection": grads["projection"],
                    },
                )
            )

        if "landmark" in self.terms and self.landmarks is not None:
            value, g_m, g_vertices = landmark_loss(m, shape, self.topo, self.landmarks)
            parts.append(
                LossPart(
                    name="landmark",
                    value=value,
                    grads={"projection": g_m, "vertices": g_vertices},
                )
            )

        if "reg" in self.terms and weights.lambda_reg > 0:
            value, grad = albedo_symmetry_loss(albedo)
            parts.append(
                LossPart(name="symmetry", value=value, grads={"albedo_uv": grad})
            )
            if self.chroma is not None and weights.w_const > 0:
                value, grad = albedo_constancy_loss(
                    albedo, self.chroma, weights.alpha, weights.p
                )
                parts.append(
                    LossPart(name="constancy", value=value, grads={"albedo_uv": grad})
                )
            shape_uv = shape_to_uv(shape, self.topo, self.lookup)
            value, grad = shape_smoothness_loss(shape_uv)
            parts.append(
                LossPart(name="smoothness", value=value, grads={"shape_uv": grad})
            )

        return parts, {"state": state, "projection": m, "shape": shape}

    def __call__(self, blocks: Blocks) -> Tuple[float, Blocks]:
        parts, decoded = self.parts(blocks)
        intermediate = "intermediate" in self.terms
        value, grads = total_loss(parts, self.weights, intermediate)
        q = self.topo.num_vertices
        g_m = np.array(grads.get("projection", np.zeros(6)), dtype=np.float64)
        g_vertices = np.array(grads.get("vertices", np.zeros((q, 3))), dtype=np.float64)
        g_albedo = grads.get("albedo_uv", np.zeros(self.lookup.shape + (3,)))
        g_light = np.zeros((3, 9))

        state = decoded["state"]
        if state is not None and ("image" in grads or "texture" in grads):
            g_render = np.zeros_like(state.image.rgb)
            if "image" in grads:
                g_render, _ = composite_backward(self.mask, grads["image"])
            rendered = self.renderer.backward(state, g_render, grads.get("texture"))
            g_m += rendered.projection
            g_vertices += rendered.vertices
            g_albedo = g_albedo + rendered.albedo
            g_light += rendered.light
        if "shape_uv" in grads:
            g_vertices += vertex_to_uv_backward(
                grads["shape_uv"], self.topo, self.lookup
            )

        return value, {
            "f": g_m[:1],
            "angles": g_m[1:4],
            "t2d": g_m[4:6],
            "light": g_light.reshape(-1),
            "f_S": self.shape_decoder.decode_backward(
                blocks["f_S"], g_vertices.reshape(-1)
            ),
            "f_A": _albedo_backward(
                self.albedo_decoder, blocks["f_A"], g_albedo, self.topo, self.lookup
            ),
        }


def pseudo_ground_truth(
    image: np.ndarray, shape: VertexShape, m: ProjectionParams, renderer: Renderer
) -> PseudoGroundTruth:
    """
    Unwarp an image through a fitted shape and camera.

    Only texels whose four bilinear taps land on covered pixels stay valid.
    """
    image = np.asarray(image, dtype=np.float64)
    height, width = image.shape[:2]
    coverage = rasterize(project(shape, m), renderer.topo, width, height).coverage
    texture, valid = renderer.unwarp(image, shape, m, coverage)
    if not valid.any():
        raise EmptyCoverageError("no texel of the fitted face is visible in the image")
    return PseudoGroundTruth(shape=shape, projection=m, texture=texture)


def _block_scales(
    cfg: FitConfig, blocks: Sequence[str], f: float
) -> Dict[str, float]:
    scales = {block: cfg.scale_for(block) for block in blocks}
    if cfg.auto_scale:
        for block in ("angles", "f_S"):
            if block in scales:
                scales[block] /= f * f
    return scales


def fit_image(
    image: np.ndarray,
    mask: OcclusionMask,
    landmarks: Optional[LandmarkSet],
    shape_decoder: Decoder,
    albedo_decoder: Decoder,
    topo: Topology,
    cfg: FitConfig,
    init_projection: ProjectionParams,
    init_light: Optional[SHLighting] = None,
    init_f_s: Optional[np.ndarray] = None,
    init_f_a: Optional[np.ndarray] = None,
    renderer: Optional[Renderer] = None,
    fx: Optional[FeatureExtractor] = None,
    metric: Metric = "interocular",
    pseudo: Optional[PseudoGroundTruth] = None,
) -> FitResult:
    """
    Fit m, L, f_S and f_A to a single image by descent on the total objective.

    Args:
        image: (H, W, 3) input image in [0, 1]
        mask: Occlusion mask of the face region
        landmarks: Optional 68 annotated landmarks
        shape_decoder: Decoder for f_S
        albedo_decoder: Decoder for f_A (per-vertex colours)
        topo: Model topology
        cfg: Fit settings
        init_projection: Starting camera
        init_light: Starting lighting, defaults to neutral ambient light
        init_f_s: Starting shape parameters, defaults to zero
        init_f_a: Starting albedo parameters, defaults to zero
        renderer: Renderer to reuse, built from the image size otherwise
        fx: Feature extractor for the perceptual term
        metric: Landmark NME normaliser
        pseudo: Fitted shape, camera and unwarped texture; adds a first stage
            on the intermediate objective

    Returns:
        FitResult with the final parameters, trace of the last stage and NME
    """
    image = np.asarray(image, dtype=np.float64)
    height, width = image.shape[:2]
    renderer = renderer or Renderer(topo, width, height)
    objective = ImageObjective(
        renderer,
        image,
        mask,
        landmarks,
        shape_decoder,
        albedo_decoder,
        cfg,
        fx,
        pseudo,
    )
    blocks: Blocks = {
        "f": np.array([init_projection.f]),
        "angles": np.array(init_projection.angles),
        "t2d": init_projection.t2d,
        "light": (init_light or neutral_light()).to_vector(),
        "f_S": _start(shape_decoder.param_dim, init_f_s),
        "f_A": _start(albedo_decoder.param_dim, init_f_a),
    }

    enabled = []
    if cfg.fit_projection:
        enabled += ["f", "angles", "t2d"]
    if cfg.fit_lighting:
        enabled.append("light")
    if cfg.fit_shape:
        enabled.append("f_S")
    if cfg.fit_albedo:
        enabled.append("f_A")

    every = {"recon", "landmark", "reg"}
    stages: List[Tuple[str, List[str], Set[str]]] = []
    if pseudo is not None:
        stages.append(("intermediate", enabled, {"intermediate", "landmark", "reg"}))
    if cfg.staged:
        camera = [b for b in enabled if b in ("f", "angles", "t2d")]
        if landmarks is not None and camera:
            stages.append(("landmarks", camera, {"landmark"}))
        appearance = [b for b in enabled if b in ("light", "f_A")]
        if appearance and appearance != enabled:
            stages.append(("appearance", appearance, every))
    stages.append(("joint", enabled, every))

    optimizer = GradientDescent(cfg)
    iterations = rejected = 0
    descent: Optional[DescentResult] = None
    for name, stage_blocks, terms in stages:
        objective.terms = terms
        if "reg" in terms:
            objective.refresh_chroma(blocks)
        if "recon" in terms:
            try:
                objective(blocks)
            except EmptyCoverageError as exc:
                raise EmptyCoverageError(
                    "the face covers no pixel at the initial projection; "
                    "initialise m from the landmarks first"
                ) from exc
        scales = _block_scales(cfg, stage_blocks, float(blocks["f"][0]))
        descent = optimizer.minimize(objective, blocks, scales)
        blocks = descent.params
        iterations += descent.iterations
        rejected += descent.rejected_steps
        logger.info(
            "stage %s: loss %.6g after %d iterations (%s)",
            name,
            descent.trace[-1],
            descent.iterations,
            descent.termination,
        )

    if descent is None:
        raise RuntimeError("no fitting stage ran")
    result = _to_result(descent)
    result.iterations = iterations
    result.rejected_steps = rejected
    m = ImageObjective.projection(blocks)
    result.projection = m
    result.light = SHLighting.from_vector(blocks["light"])
    result.f_S = blocks["f_S"].tolist()
    result.f_A = blocks["f_A"].tolist()
    parts, decoded = objective.parts(blocks)
    _check_albedo_range(
        decode_albedo(albedo_decoder, blocks["f_A"], topo, renderer.lookup)
    )
    result.breakdown = breakdown(parts, cfg.weights)
    if landmarks is not None:
        result.nme = landmark_nme(m, decoded["shape"], topo, landmarks, metric)
    return result


def relight_texture(
    texture: UVTextureMap,
    normals_uv: UVNormalMap,
    source_light: SHLighting,
    original_light: SHLighting,
    guard: float = SHADING_GUARD,
) -> Tuple[UVTextureMap, int]:
    """
    Swap the shading baked into a texture: T * C_source / C_original.

    Texels whose original shading magnitude is below guard keep their value.

    Returns:
        (relit texture, number of excluded texel channels)
    """
    c_src = shading(normals_uv, source_light).data
    c_orig = shading(normals_uv, original_light).data
    region = texture.mask[..., None] & normals_uv.mask[..., None]
    usable = region & (np.abs(c_orig) >= guard)
    ratio = np.where(usable, c_src / np.where(usable, c_orig, 1.0), 1.0)
    excluded = int(np.count_nonzero(region & ~usable))
    if excluded:
        logger.warning(
            "relighting skipped %d texel channels with near-zero shading", excluded
        )
    relit = np.where(usable, texture.data * ratio, texture.data)
    return UVTextureMap(data=relit, mask=texture.mask), excluded


def relight(
    target_shape: VertexShape,
    target_texture: UVTextureMap,
    source_light: SHLighting,
    m: ProjectionParams,
    topo: Topology,
    width: int,
    height: int,
    original_light: Optional[SHLighting] = None,
    background: Sequence[float] = (0.0, 0.0, 0.0),
) -> RenderedImage:
    """
    Render the target geometry under the source lighting.

    An albedo map is shaded directly. A raw texture needs the original
    lighting and has its shading replaced texel by texel.
    """
    renderer = Renderer(topo, width, height, background)
    if isinstance(target_texture, UVAlbedoMap):
        return renderer.render(m, source_light, target_shape, target_texture).image
    if original_light is None:
        raise ValueError("relighting a shaded texture needs the original lighting")
    rotation = rotation_from_angles(*m.angles)
    normals = vertex_normals(target_shape, topo) @ rotation.T
    normals_uv, _ = uv_normal_map(normals, topo, renderer.lookup)
    relit, _ = relight_texture(target_texture, normals_uv, source_light, original_light)
    image, _ = renderer.render_texture(m, target_shape, relit)
    return image


__all__ = [
    "ImageObjective",
    "LANDMARK_EYE_CORNERS",
    "bbox_size",
    "decode_albedo",
    "fit_albedo_lighting",
    "fit_image",
    "fit_shape",
    "initial_projection",
    "inter_ocular_distance",
    "landmark_nme",
    "neutral_light",
    "nme",
    "pseudo_ground_truth",
    "relight",
    "relight_texture",
]
