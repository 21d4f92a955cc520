"""Finite-difference checks of every analytic gradient."""

import logging
import math
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from ..core.camera import project, project_backward
from ..core.lighting import shade, shade_backward
from ..core.losses import (
    IdentityFeatureExtractor,
    albedo_constancy_loss,
    albedo_symmetry_loss,
    intermediate_loss,
    landmark_loss,
    perceptual_loss,
    recon_image_loss,
    shape_smoothness_loss,
)
from ..core.mesh_core import sample_uv, sample_uv_backward
from ..core.rasterizer import Renderer
from ..fitting.decoders import TwoLayerDecoder
from ..models.camera import ProjectionParams
from ..models.lighting import SHLighting
from ..models.losses import LandmarkSet, LossWeights, PseudoGroundTruth
from ..models.mesh import UVAlbedoMap, UVMap, UVNormalMap, UVTextureMap, VertexShape
from ..models.morphable import MorphableModel
from .output_formatter import GradcheckRow
from .synthetic import build_synthetic_model, default_light

logger = logging.getLogger(__name__)

DEFAULT_TRIALS = 50
# relative-error floor so that both-zero derivatives compare equal
ERROR_FLOOR = 1e-10
# trials with a kink closer than this to the evaluation point are skipped
KINK_GUARD = 1e-6
RENDER_SIZE = 16
# smaller steps keep pixel UV points from crossing texel lines
FROZEN_STEP = 1e-7

Scalar = Callable[[np.ndarray], float]


def relative_error(analytic: float, numeric: float) -> float:
    scale = max(abs(analytic), abs(numeric), ERROR_FLOOR)
    return abs(analytic - numeric) / scale


def directional_error(
    fn: Scalar, grad: np.ndarray, x: np.ndarray, rng: np.random.Generator, h: float
) -> float:
    """Compare grad . d with the central difference of fn along a random d."""
    direction = _tilted_direction(rng, np.asarray(grad, dtype=np.float64))
    numeric = (fn(x + h * direction) - fn(x - h * direction)) / (2.0 * h)
    return relative_error(float(np.sum(grad * direction)), numeric)


def _tilted_direction(rng: np.random.Generator, grad: np.ndarray) -> np.ndarray:
    """Random unit direction tilted towards the gradient so grad . d is not tiny."""
    d = rng.normal(size=grad.shape)
    d /= np.linalg.norm(d)
    norm = np.linalg.norm(grad)
    if norm > 0:
        d += grad / norm
    return d / np.linalg.norm(d)


def _row(name: str, errors: List[float], tolerance: float) -> GradcheckRow:
    worst = max(errors) if errors else 0.0
    finite = all(math.isfinite(e) for e in errors)
    passed = bool(errors) and finite and worst < tolerance
    logger.debug("%s: max relative error %.3e over %d trials", name, worst, len(errors))
    return GradcheckRow(name, worst, tolerance, passed)


def _unit_normals(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    n = rng.normal(size=shape)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def check_sample_uv(rng: np.random.Generator, trials: int) -> GradcheckRow:
    errors = []
    rows, cols = 6, 7
    while len(errors) < trials:
        data = rng.normal(size=(rows, cols, 3))
        p = rng.uniform(0.0, 1.0, size=(5, 2)) * [rows - 1, cols - 1]
        frac = np.abs(p - np.round(p))
        if frac.min() < 1e-3:
            continue
        w = rng.normal(size=(5, 3))
        grad_map, grad_p = sample_uv_backward(data, p, w)

        def on_p(x: np.ndarray) -> float:
            return float(np.sum(w * sample_uv(data, x)))

        def on_map(x: np.ndarray) -> float:
            return float(np.sum(w * sample_uv(x, p)))

        errors.append(directional_error(on_p, grad_p, p, rng, 1e-5))
        errors.append(
            directional_error(on_map, grad_map, data, rng, 1e-5)
        )
    return _row("sample_uv", errors, 1e-6)


def check_project(rng: np.random.Generator, trials: int) -> GradcheckRow:
    errors = []
    for _ in range(trials):
        positions = rng.normal(size=(10, 3))
        angles = rng.uniform(-math.pi, math.pi, 3)
        m = np.concatenate([[rng.uniform(0.5, 2.0)], angles, rng.normal(size=2)])
        g_xy = rng.normal(size=(10, 2))
        g_z = rng.normal(size=10)

        def fn(x: np.ndarray) -> float:
            s = VertexShape(positions=x[6:].reshape(10, 3))
            out = project(s, ProjectionParams.from_vector(x[:6]))
            return float(np.sum(g_xy * out.coords) + np.sum(g_z * out.depth))

        grad_s, grad_m = project_backward(
            VertexShape(positions=positions), ProjectionParams.from_vector(m), g_xy, g_z
        )
        x = np.concatenate([m, positions.reshape(-1)])
        grad = np.concatenate([grad_m, grad_s.reshape(-1)])
        errors.append(directional_error(fn, grad, x, rng, 1e-6))
    return _row("project", errors, 1e-5)


def check_shade(rng: np.random.Generator, trials: int) -> GradcheckRow:
    errors = []
    size = (4, 5)
    mask = np.ones(size, dtype=bool)
    for _ in range(trials):
        albedo = rng.uniform(0.2, 0.9, size=size + (3,))
        normals = _unit_normals(rng, size + (3,))
        light = rng.normal(size=(3, 9))
        w = rng.normal(size=size + (3,))

        def value(a: np.ndarray, n: np.ndarray, coeffs: np.ndarray) -> float:
            n = n / np.linalg.norm(n, axis=-1, keepdims=True)
            out = shade(
                UVAlbedoMap(data=a, mask=mask),
                UVNormalMap(data=n, mask=mask),
                SHLighting(coeffs=coeffs),
            )
            return float(np.sum(w * out.data))

        g_a, g_l, g_n = shade_backward(
            UVAlbedoMap(data=albedo, mask=mask),
            UVNormalMap(data=normals, mask=mask),
            SHLighting(coeffs=light),
            w,
        )
        errors.append(
            directional_error(
                lambda x: value(x, normals, light), g_a, albedo, rng, 1e-6
            )
        )
        errors.append(
            directional_error(
                lambda x: value(albedo, x, light), g_n, normals, rng, 1e-6
            )
        )
        errors.append(
            directional_error(
                lambda x: value(albedo, normals, x), g_l, light, rng, 1e-6
            )
        )
    return _row("shade", errors, 1e-4)


class _RenderFixture:
    """Random renders of the synthetic model on a small image."""

    def __init__(self, model: MorphableModel, rng: np.random.Generator):
        self.model = model
        self.rng = rng
        self.renderer = Renderer(model.topology, RENDER_SIZE, RENDER_SIZE)
        self.mask = self.renderer.uv_mask

    def draw(self) -> Tuple[ProjectionParams, SHLighting, VertexShape, UVAlbedoMap]:
        rng = self.rng
        half = RENDER_SIZE / 2
        m = ProjectionParams(
            f=5.0 * rng.uniform(0.9, 1.1),
            pitch=math.pi + rng.uniform(-0.2, 0.2),
            yaw=rng.uniform(-0.3, 0.3),
            roll=rng.uniform(-0.2, 0.2),
            tx=half + rng.uniform(-1, 1),
            ty=half + rng.uniform(-1, 1),
        )
        coeffs = default_light().coeffs + 0.1 * rng.normal(size=(3, 9))
        shape_model = self.model.shape_model
        f_s = 0.3 * rng.normal(size=shape_model.param_dim)
        shape = VertexShape.from_flat(shape_model.decode(f_s))
        data = rng.uniform(0.2, 0.9, size=self.mask.shape + (3,))
        albedo = UVAlbedoMap(data=data * self.mask[..., None], mask=self.mask)
        return m, SHLighting(coeffs=coeffs), shape, albedo


def check_render(
    model: MorphableModel, rng: np.random.Generator, trials: int
) -> List[GradcheckRow]:
    """Albedo and light paths exactly; projection and vertices with frozen coverage."""
    fixture = _RenderFixture(model, rng)
    renderer = fixture.renderer
    mask = fixture.mask
    errors: Dict[str, List[float]] = {
        "albedo": [],
        "light": [],
        "projection": [],
        "vertices": [],
    }
    while len(errors["albedo"]) < trials:
        m, light, shape, albedo = fixture.draw()
        state = renderer.render(m, light, shape, albedo)
        if not state.image.coverage.any():
            continue
        tri_id = state.fragments.tri_id
        w = rng.normal(size=state.image.rgb.shape)
        grads = renderer.backward(state, w)

        def image_sum(
            m_: ProjectionParams, l_: SHLighting, s_: VertexShape, a_: UVAlbedoMap
        ) -> float:
            rendered = renderer.render(m_, l_, s_, a_, tri_id=tri_id)
            return float(np.sum(w * rendered.image.rgb))

        errors["albedo"].append(
            directional_error(
                lambda x: image_sum(m, light, shape, UVAlbedoMap(data=x, mask=mask)),
                grads.albedo,
                albedo.data,
                rng,
                1e-6,
            )
        )
        errors["light"].append(
            directional_error(
                lambda x: image_sum(m, SHLighting(coeffs=x), shape, albedo),
                grads.light,
                light.coeffs,
                rng,
                1e-6,
            )
        )
        errors["projection"].append(
            directional_error(
                lambda x: image_sum(
                    ProjectionParams.from_vector(x), light, shape, albedo
                ),
                grads.projection,
                m.to_vector(),
                rng,
                FROZEN_STEP,
            )
        )
        errors["vertices"].append(
            directional_error(
                lambda x: image_sum(m, light, VertexShape(positions=x), albedo),
                grads.vertices,
                shape.positions,
                rng,
                FROZEN_STEP,
            )
        )
    return [
        _row("render_albedo", errors["albedo"], 1e-5),
        _row("render_light", errors["light"], 1e-4),
        _row("render_projection", errors["projection"], 1e-4),
        _row("render_vertices", errors["vertices"], 1e-4),
    ]


def check_losses(
    model: MorphableModel, rng: np.random.Generator, trials: int
) -> List[GradcheckRow]:
    """Every loss gradient on random smooth instances."""
    topo = model.topology
    mean = VertexShape.from_flat(model.shape_model.mean)
    size = (6, 6)
    full = np.ones(size, dtype=bool)
    weights = LossWeights()
    fx = IdentityFeatureExtractor()
    errors: Dict[str, List[float]] = {
        "recon_image": [],
        "perceptual": [],
        "landmark": [],
        "symmetry": [],
        "constancy": [],
        "smoothness": [],
        "intermediate": [],
    }

    for _ in range(trials):
        rendered = rng.uniform(size=size + (3,))
        target = rng.uniform(size=size + (3,))
        coverage = rng.uniform(size=size) < 0.7
        coverage[0, 0] = True
        _, g = recon_image_loss(rendered, target, coverage)
        errors["recon_image"].append(
            directional_error(
                lambda x: recon_image_loss(x, target, coverage)[0],
                g,
                rendered,
                rng,
                1e-6,
            )
        )
        _, g, _ = perceptual_loss(fx, rendered, target)
        errors["perceptual"].append(
            directional_error(
                lambda x: perceptual_loss(fx, x, target)[0],
                g,
                rendered,
                rng,
                1e-6,
            )
        )

        m = ProjectionParams(
            f=rng.uniform(10, 30),
            pitch=math.pi + rng.uniform(-0.3, 0.3),
            yaw=rng.uniform(-0.3, 0.3),
            roll=rng.uniform(-0.3, 0.3),
            tx=rng.uniform(20, 40),
            ty=rng.uniform(20, 40),
        )
        visible = rng.uniform(size=68) < 0.8
        gt = LandmarkSet(points=rng.uniform(0, 64, size=(68, 2)), visible=visible)
        _, g_m, g_v = landmark_loss(m, mean, topo, gt)
        x = np.concatenate([m.to_vector(), mean.positions.reshape(-1)])
        errors["landmark"].append(
            directional_error(
                lambda y: landmark_loss(
                    ProjectionParams.from_vector(y[:6]),
                    VertexShape(positions=y[6:].reshape(-1, 3)),
                    topo,
                    gt,
                )[0],
                np.concatenate([g_m, g_v.reshape(-1)]),
                x,
                rng,
                1e-6,
            )
        )

        albedo = rng.uniform(size=size + (3,))
        diffs = np.abs(albedo - albedo[:, ::-1])
        off_axis = diffs[:, : size[1] // 2]
        if off_axis.min() > KINK_GUARD * 10:
            _, g = albedo_symmetry_loss(UVMap(data=albedo, mask=full))
            errors["symmetry"].append(
                directional_error(
                    lambda y: albedo_symmetry_loss(UVMap(data=y, mask=full))[0],
                    g,
                    albedo,
                    rng,
                    1e-8,
                )
            )

        chroma = UVMap(data=rng.uniform(0.1, 1.0, size=size + (3,)), mask=full)
        _, g = albedo_constancy_loss(
            UVMap(data=albedo, mask=full), chroma, weights.alpha, weights.p
        )
        errors["constancy"].append(
            directional_error(
                lambda y: albedo_constancy_loss(
                    UVMap(data=y, mask=full), chroma, weights.alpha, weights.p
                )[0],
                g,
                albedo,
                rng,
                1e-6,
            )
        )

        positions = rng.normal(size=size + (3,))
        _, g = shape_smoothness_loss(UVMap(data=positions, mask=full))
        errors["smoothness"].append(
            directional_error(
                lambda y: shape_smoothness_loss(UVMap(data=y, mask=full))[0],
                g,
                positions,
                rng,
                1e-6,
            )
        )

        errors["intermediate"].append(
            _check_intermediate(rng, m, mean, size, full, weights)
        )

    return [
        _row(f"loss_{name}", values, 1e-4) for name, values in errors.items()
    ]


def _check_intermediate(
    rng: np.random.Generator,
    m: ProjectionParams,
    shape: VertexShape,
    size: Tuple[int, int],
    mask: np.ndarray,
    weights: LossWeights,
) -> float:
    noise = 0.1 * rng.normal(size=shape.positions.shape)
    gt = PseudoGroundTruth(
        shape=VertexShape(positions=shape.positions + noise),
        projection=m,
        texture=UVTextureMap(data=rng.uniform(size=size + (3,)), mask=mask),
    )
    signs = rng.choice([-1.0, 1.0], size=size + (3,))
    texture = gt.texture.data + signs * rng.uniform(0.01, 0.1, size=size + (3,))
    m_vec = m.to_vector() + 0.1 * rng.normal(size=6)
    n_pos = shape.positions.size

    def fn(x: np.ndarray) -> float:
        return intermediate_loss(
            VertexShape(positions=x[:n_pos].reshape(-1, 3)),
            UVMap(data=x[n_pos:-6].reshape(texture.shape), mask=mask),
            ProjectionParams.from_vector(x[-6:]),
            gt,
            weights,
        )[0]

    _, grads = intermediate_loss(
        shape,
        UVMap(data=texture, mask=mask),
        ProjectionParams.from_vector(m_vec),
        gt,
        weights,
    )
    x = np.concatenate([shape.positions.reshape(-1), texture.reshape(-1), m_vec])
    grad = np.concatenate(
        [grads["shape"].reshape(-1), grads["texture"].reshape(-1), grads["projection"]]
    )
    return directional_error(fn, grad, x, rng, 1e-7)


def check_decoder(rng: np.random.Generator, trials: int) -> GradcheckRow:
    errors = []
    for trial in range(trials):
        decoder = TwoLayerDecoder.random(4, 6, 9, seed=trial)
        params = rng.normal(size=4)
        w = rng.normal(size=9)
        grad = decoder.decode_backward(params, w)
        errors.append(
            directional_error(
                lambda x: float(np.sum(w * decoder.decode(x))),
                grad,
                params,
                rng,
                1e-6,
            )
        )
    return _row("two_layer_decoder", errors, 1e-5)


def run_gradcheck(
    seed: int = 0,
    trials: int = DEFAULT_TRIALS,
    model: Optional[MorphableModel] = None,
) -> List[GradcheckRow]:
    """
    Run the whole finite-difference suite.

    Args:
        seed: Seed of the random instances
        trials: Random instances per check
        model: Model rendered by the render checks, the synthetic model by default

    Returns:
        One row per checked operation
    """
    rng = np.random.default_rng(seed)
    model = model or build_synthetic_model()
    rows = [
        check_sample_uv(rng, trials),
        check_project(rng, trials),
        check_shade(rng, trials),
    ]
    rows += check_render(model, rng, trials)
    rows += check_losses(model, rng, trials)
    rows.append(check_decoder(rng, trials))
    return rows


def all_passed(rows: Iterable[GradcheckRow]) -> bool:
    return all(row.passed for row in rows)
