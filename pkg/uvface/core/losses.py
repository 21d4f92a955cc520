"""Fitting objectives with values and analytic gradients."""

import logging
from typing import (
    Dict,
    Iterable,
    Literal,
    Mapping,
    Optional,
    Protocol,
    Sequence,
    Tuple,
    Union,
)

import numpy as np

from ..errors import EmptyCoverageError, ShapeMismatchError
from ..models.camera import ProjectionParams
from ..models.losses import LandmarkSet, LossPart, LossWeights, PseudoGroundTruth
from ..models.mesh import Topology, UVMap, VertexShape
from ..models.render import RenderedImage
from .camera import project, project_backward
from .mesh_core import flip_uv

logger = logging.getLogger(__name__)

# smoothing of the |x|^p kink in the constancy term
CONSTANCY_EPS = 1e-6

ImageLike = Union[RenderedImage, np.ndarray]
Boundary = Literal["clip", "interior"]


class FeatureExtractor(Protocol):
    """A fixed network phi exposing a set of layers for the perceptual loss."""

    layers: Sequence[str]

    def evaluate(self, image: np.ndarray) -> Dict[str, np.ndarray]:
        """Activations per layer for an (H, W, 3) image."""
        ...

    def backward(self, image: np.ndarray, grads: Dict[str, np.ndarray]) -> np.ndarray:
        """Image gradient given upstream gradients on each layer's activations."""
        ...


class IdentityFeatureExtractor:
    """One layer holding the image itself."""

    layers: Sequence[str] = ("image",)

    def evaluate(self, image: np.ndarray) -> Dict[str, np.ndarray]:
        return {"image": np.asarray(image, dtype=np.float64)}

    def backward(self, image: np.ndarray, grads: Dict[str, np.ndarray]) -> np.ndarray:
        return np.asarray(grads["image"], dtype=np.float64)


def _rgb(image: ImageLike) -> np.ndarray:
    if isinstance(image, RenderedImage):
        return image.rgb
    return np.asarray(image, dtype=np.float64)


def recon_image_loss(
    rendered: ImageLike, target: ImageLike, coverage: Optional[np.ndarray] = None
) -> Tuple[float, np.ndarray]:
    """
    Robust l2,1 photometric loss: mean per-pixel RGB distance over covered pixels.

    Args:
        rendered: Rendered (or composited) image
        target: Input image
        coverage: Covered pixel set; defaults to the rendered image's coverage

    Returns:
        (loss, gradient w.r.t. the rendered rgb)
    """
    rgb, other = _rgb(rendered), _rgb(target)
    if rgb.shape != other.shape:
        raise ShapeMismatchError(f"image sizes differ: {rgb.shape} vs {other.shape}")
    if coverage is None:
        if not isinstance(rendered, RenderedImage):
            raise ValueError("coverage is required for a bare image")
        coverage = rendered.coverage
    covered = np.asarray(coverage, dtype=bool)
    count = int(covered.sum())
    if count == 0:
        raise EmptyCoverageError("no pixel is covered by the face mesh")

    diff = (rgb - other)[covered]
    norms = np.linalg.norm(diff, axis=1)
    grad = np.zeros_like(rgb)
    # zero gradient on exact zero residuals
    safe = np.where(norms > 0, norms, 1.0)
    grad[covered] = np.where(norms[:, None] > 0, diff / safe[:, None], 0.0) / count
    return float(norms.sum() / count), grad


def perceptual_loss(
    fx: Optional[FeatureExtractor], rendered: ImageLike, target: ImageLike
) -> Tuple[float, np.ndarray, bool]:
    """
    Normalised squared feature distance summed over the extractor's layers.

    Returns:
        (loss, gradient w.r.t. the rendered rgb, enabled); a missing extractor
        yields (0, zeros, False)
    """
    rgb, other = _rgb(rendered), _rgb(target)
    if fx is None:
        return 0.0, np.zeros_like(rgb), False
    pred = fx.evaluate(rgb)
    ref = fx.evaluate(other)
    total = 0.0
    grads: Dict[str, np.ndarray] = {}
    for layer in fx.layers:
        diff = pred[layer] - ref[layer]
        total += float(np.sum(diff * diff) / diff.size)
        grads[layer] = 2.0 * diff / diff.size
    return total, fx.backward(rgb, grads), True


def landmark_loss(
    m: ProjectionParams, s: VertexShape, topo: Topology, gt: LandmarkSet
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Squared distance between projected landmark vertices and annotations.

    Returns:
        (loss, gradient w.r.t. m, gradient w.r.t. the (Q, 3) vertices)
    """
    idx = topo.landmark_indices
    subset = VertexShape(positions=s.positions[idx])
    coords = project(subset, m).coords
    diff = np.where(gt.visible[:, None], coords - np.nan_to_num(gt.points), 0.0)
    grad_subset, grad_m = project_backward(subset, m, 2.0 * diff)
    grad_vertices = np.zeros_like(s.positions)
    np.add.at(grad_vertices, idx, grad_subset)
    return float(np.sum(diff * diff)), grad_m, grad_vertices


def albedo_symmetry_loss(a: UVMap) -> Tuple[float, np.ndarray]:
    """L1 distance between the albedo map and its horizontal mirror."""
    valid = a.mask & flip_uv(a.mask)
    diff = (a.data - flip_uv(a.data)) * valid[..., None]
    return float(np.abs(diff).sum()), 2.0 * np.sign(diff)


def chromaticity(image: np.ndarray) -> np.ndarray:
    """c(x) = I(x) / |I(x)|, zero where the colour has zero norm."""
    image = np.asarray(image, dtype=np.float64)
    norms = np.linalg.norm(image, axis=-1, keepdims=True)
    return np.where(norms > 0, image / np.where(norms > 0, norms, 1.0), 0.0)


def _neighbour_pairs(mask: np.ndarray) -> Iterable[Tuple[np.ndarray, np.ndarray]]:
    """Unordered right and down 4-neighbour pairs with both texels masked in."""
    right = mask[:, :-1] & mask[:, 1:]
    r, c = np.nonzero(right)
    yield (r, c), (r, c + 1)
    down = mask[:-1, :] & mask[1:, :]
    r, c = np.nonzero(down)
    yield (r, c), (r + 1, c)


def albedo_constancy_loss(
    a: UVMap, chroma_ref: UVMap, alpha: float, p: float
) -> Tuple[float, np.ndarray]:
    """
    Chromaticity-weighted sparsity of albedo differences between neighbours.

    Every ordered neighbour pair counts, so each unordered pair counts twice.
    |d|^p is smoothed as (|d|^2 + eps^2)^(p/2) - eps^p so it is exactly zero
    for equal neighbours.
    """
    if a.data.shape != chroma_ref.data.shape:
        raise ShapeMismatchError("albedo and chromaticity reference sizes differ")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"constancy exponent must lie in (0, 1], got {p}")
    mask = a.mask & chroma_ref.mask
    chroma = chromaticity(chroma_ref.data)
    eps2 = CONSTANCY_EPS * CONSTANCY_EPS
    offset = eps2 ** (p / 2.0)
    value = 0.0
    grad = np.zeros_like(a.data)
    for i, j in _neighbour_pairs(mask):
        delta = a.data[i] - a.data[j]
        omega = np.exp(-alpha * np.linalg.norm(chroma[i] - chroma[j], axis=1))
        sq = np.sum(delta * delta, axis=1) + eps2
        value += 2.0 * float(np.sum(omega * (sq ** (p / 2.0) - offset)))
        g = (2.0 * omega * p * sq ** (p / 2.0 - 1.0))[:, None] * delta
        np.add.at(grad, i, g)
        np.add.at(grad, j, -g)
    return value, grad


_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def _shift(array: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """out[r, c] = array[r - dr, c - dc], zero filled."""
    out = np.zeros_like(array)
    rows, cols = array.shape[:2]
    out[max(dr, 0) : rows + min(dr, 0), max(dc, 0) : cols + min(dc, 0)] = array[
        max(-dr, 0) : rows + min(-dr, 0), max(-dc, 0) : cols + min(-dc, 0)
    ]
    return out


def isolated_texels(mask: np.ndarray) -> int:
    """Masked-in texels without any masked-in 4-neighbour."""
    mask = np.asarray(mask, dtype=bool)
    count = sum(_shift(mask, -dr, -dc).astype(int) for dr, dc in _OFFSETS)
    return int(np.count_nonzero(mask & (count == 0)))


def shape_smoothness_loss(
    s: UVMap, boundary: Boundary = "clip"
) -> Tuple[float, np.ndarray]:
    """
    Laplacian smoothness of a UV position map.

    Each masked-in texel is compared with the mean of its masked-in
    4-neighbours. ``clip`` uses whatever neighbours exist and skips isolated
    texels; ``interior`` only scores texels with all four neighbours.
    """
    mask = s.mask
    data = np.where(mask[..., None], s.data, 0.0)
    nb_masks = [_shift(mask, -dr, -dc) for dr, dc in _OFFSETS]
    count = sum(m.astype(np.float64) for m in nb_masks)
    total = sum(_shift(data, -dr, -dc) for dr, dc in _OFFSETS)

    if boundary == "interior":
        scored = mask & (count == 4)
    elif boundary == "clip":
        scored = mask & (count > 0)
        isolated = int(np.count_nonzero(mask & (count == 0)))
        if isolated:
            logger.warning("smoothness skipped %d isolated texels", isolated)
    else:
        raise ValueError(f"unknown boundary mode '{boundary}'")

    safe_count = np.where(count > 0, count, 1.0)[..., None]
    residual = np.where(scored[..., None], data - total / safe_count, 0.0)
    norms = np.linalg.norm(residual, axis=-1, keepdims=True)
    unit = np.where(norms > 0, residual / np.where(norms > 0, norms, 1.0), 0.0)

    grad = unit.copy()
    spread = unit / safe_count
    for (dr, dc), nb in zip(_OFFSETS, nb_masks):
        grad -= _shift(spread * nb[..., None], dr, dc)
    grad *= mask[..., None]
    return float(norms.sum()), grad


def intermediate_loss(
    pred_shape: VertexShape,
    pred_texture: UVMap,
    pred_m: ProjectionParams,
    gt: PseudoGroundTruth,
    weights: LossWeights,
) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Supervised loss against pseudo ground truth: L_S + lambda_T L_T + lambda_m L_m.

    Returns:
        (loss, gradients keyed by "shape", "texture" and "projection")
    """
    if pred_shape.positions.shape != gt.shape.positions.shape:
        raise ShapeMismatchError("predicted and pseudo ground-truth shapes differ")
    if pred_texture.data.shape != gt.texture.data.shape:
        raise ShapeMismatchError("predicted and pseudo ground-truth textures differ")
    d_shape = pred_shape.positions - gt.shape.positions
    d_tex = (pred_texture.data - gt.texture.data) * gt.valid[..., None]
    d_m = pred_m.to_vector() - gt.projection.to_vector()

    value = (
        float(np.sum(d_shape * d_shape))
        + weights.lambda_T * float(np.abs(d_tex).sum())
        + weights.lambda_m * float(np.sum(d_m * d_m))
    )
    grads = {
        "shape": 2.0 * d_shape,
        "texture": weights.lambda_T * np.sign(d_tex),
        "projection": 2.0 * weights.lambda_m * d_m,
    }
    return value, grads


def total_loss(
    parts: Sequence[LossPart], weights: LossWeights, intermediate: bool = False
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Weighted sum of loss parts with per-block gradient accumulation."""
    value = 0.0
    grads: Dict[str, np.ndarray] = {}
    for part in parts:
        if not part.enabled:
            continue
        w = weights.weight_for(part.name, intermediate)
        value += w * part.value
        for block, g in part.grads.items():
            if block in grads:
                grads[block] = grads[block] + w * g
            else:
                grads[block] = w * np.asarray(g, dtype=np.float64)
    return value, grads


def breakdown(parts: Sequence[LossPart], weights: LossWeights) -> Dict[str, float]:
    """Raw value of each enabled part plus the weighted total."""
    values = {part.name: part.value for part in parts if part.enabled}
    values["total"] = total_loss(parts, weights)[0]
    return values


def format_values(values: Mapping[str, float]) -> str:
    """name=value per line."""
    return "\n".join(f"{k}={v!r}" for k, v in values.items())


def format_breakdown(parts: Sequence[LossPart], weights: LossWeights) -> str:
    """name=value per line, ending with the weighted total."""
    return format_values(breakdown(parts, weights))
