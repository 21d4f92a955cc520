"""Bundled synthetic face-proxy model.

A 25 x 25 vertex lattice on a cylinder patch with a nose bump, unwrapped
onto a 49 x 49 UV grid. Vertex (i, j) sits at texel (2i, 2j), so the
cylindrical unwrap of the mean shape reproduces the stored UV coordinates
exactly. Landmarks follow the 68-point layout: jaw, brows, nose bridge,
nose bottom, eyes, outer mouth, inner mouth.
"""

import math
from typing import List, Tuple

import numpy as np

from ..core.camera import project
from ..models.camera import ProjectionParams
from ..models.lighting import NUM_SH, SHLighting
from ..models.losses import LandmarkSet
from ..models.mesh import Topology, UnwrapConstants, VertexShape
from ..models.morphable import LinearModel, MorphableModel

LATTICE = 25
UV_SIZE = 2 * LATTICE - 1
HALF_WIDTH = 0.4 * math.pi
SKIN = (0.8, 0.6, 0.5)
IMAGE_SIZE = 64

SYNTHETIC_UNWRAP = UnwrapConstants(
    alpha1=(LATTICE - 1) / HALF_WIDTH,
    beta1=float(LATTICE - 1),
    alpha2=-float(LATTICE - 1),
    beta2=float(LATTICE - 1),
)

_EYE_LEFT = [(9, 5), (8, 6), (8, 8), (9, 9), (10, 8), (10, 6)]
_EYE_RIGHT = [(9, 15), (8, 16), (8, 18), (9, 19), (10, 18), (10, 16)]


def landmark_lattice() -> List[Tuple[int, int]]:
    """The 68 landmark positions as (row, column) lattice points."""
    points = [(22, j) for j in range(4, 21)]
    points += [(7, j) for j in range(5, 10)] + [(7, j) for j in range(15, 20)]
    points += [(i, 12) for i in range(9, 13)]
    points += [(14, j) for j in range(10, 15)]
    points += _EYE_LEFT + _EYE_RIGHT
    points += [(16, j) for j in range(9, 16)] + [(18, j) for j in range(14, 9, -1)]
    points += [(17, j) for j in range(9, 17)]
    return points


def _vertex(i: int, j: int) -> int:
    return i * LATTICE + j


def _lattice_triangles() -> np.ndarray:
    triangles = []
    for i in range(LATTICE - 1):
        for j in range(LATTICE - 1):
            a, b = _vertex(i, j), _vertex(i + 1, j)
            c, d = _vertex(i, j + 1), _vertex(i + 1, j + 1)
            triangles.append((a, b, c))
            triangles.append((b, d, c))
    return np.array(triangles, dtype=np.int64)


def _surface_coords() -> Tuple[np.ndarray, np.ndarray]:
    """Cylinder angle and height of every vertex."""
    i, j = np.meshgrid(np.arange(LATTICE), np.arange(LATTICE), indexing="ij")
    u, v = 2.0 * i.reshape(-1), 2.0 * j.reshape(-1)
    c = SYNTHETIC_UNWRAP
    theta = (v - c.beta1) / c.alpha1
    y = (u - c.beta2) / c.alpha2
    return theta, y


def _radial(theta: np.ndarray) -> np.ndarray:
    return np.stack([np.sin(theta), np.zeros_like(theta), np.cos(theta)], axis=1)


def _mean_shape(theta: np.ndarray, y: np.ndarray) -> np.ndarray:
    nose = 0.25 * np.exp(-(theta**2 + y**2) / (2 * 0.15**2))
    radius = 1.0 + nose
    return radius[:, None] * _radial(theta) + np.stack(
        [np.zeros_like(y), y, np.zeros_like(y)], axis=1
    )


def _low_frequency_fields(theta: np.ndarray, y: np.ndarray, count: int) -> np.ndarray:
    t = theta / HALF_WIDTH
    fields = [
        np.ones_like(t),
        y,
        t,
        t * y,
        y**2,
        t**2,
        np.cos(math.pi * t) * y,
        np.sin(math.pi * y) * t,
        t**2 * y,
        y**3,
    ]
    if count > len(fields):
        raise ValueError(f"at most {len(fields)} synthetic bases are available")
    return np.stack(fields[:count], axis=1)


def _orthonormal(columns: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(columns)
    return q


def build_synthetic_model(seed: int = 0, l_s: int = 8, l_a: int = 8) -> MorphableModel:
    """
    Build the face-proxy morphable model.

    Args:
        seed: Seed for the albedo colour directions
        l_s: Number of shape bases
        l_a: Number of albedo bases

    Returns:
        Model with orthonormal shape and albedo bases
    """
    rng = np.random.default_rng(seed)
    theta, y = _surface_coords()
    q = theta.size

    mean_shape = _mean_shape(theta, y)
    radial = _radial(theta)
    shape_fields = _low_frequency_fields(theta, y, l_s)
    shape_columns = (shape_fields[:, None, :] * radial[:, :, None]).reshape(3 * q, l_s)

    albedo_fields = _low_frequency_fields(theta, y, l_a)
    colours = rng.normal(size=(l_a, 3))
    colours /= np.linalg.norm(colours, axis=1, keepdims=True)
    albedo_columns = (albedo_fields[:, None, :] * colours.T[None, :, :]).reshape(
        3 * q, l_a
    )
    mean_albedo = np.tile(np.asarray(SKIN), q)

    lattice = landmark_lattice()
    i, j = np.meshgrid(np.arange(LATTICE), np.arange(LATTICE), indexing="ij")
    topology = Topology(
        triangles=_lattice_triangles(),
        landmark_indices=np.array([_vertex(a, b) for a, b in lattice]),
        uv_coords=np.stack([2.0 * i.reshape(-1), 2.0 * j.reshape(-1)], axis=1),
        num_vertices=q,
        uv_shape=(UV_SIZE, UV_SIZE),
        eye_corner_indices=(_vertex(*_EYE_LEFT[0]), _vertex(*_EYE_RIGHT[3])),
    )
    return MorphableModel(
        topology=topology,
        shape_model=LinearModel(
            mean=mean_shape.reshape(-1), bases=_orthonormal(shape_columns)
        ),
        albedo_model=LinearModel(mean=mean_albedo, bases=_orthonormal(albedo_columns)),
        unwrap=SYNTHETIC_UNWRAP,
    )


def default_projection() -> ProjectionParams:
    """Frontal, upright view centred in a 64 x 64 image."""
    half = IMAGE_SIZE / 2
    return ProjectionParams(f=20.0, pitch=math.pi, tx=half, ty=half)


def default_light() -> SHLighting:
    """Ambient light with a frontal first-order term."""
    coeffs = np.zeros((3, NUM_SH))
    coeffs[:, 0] = 3.0
    coeffs[:, 2] = -0.5
    return SHLighting(coeffs=coeffs)


def synthetic_params(
    model: MorphableModel, seed: int = 0, scale: float = 0.5
) -> Tuple[ProjectionParams, SHLighting, np.ndarray, np.ndarray]:
    """
    Draw a random ground-truth parameter tuple near the default view.

    Returns:
        (m, L, f_S, f_A)
    """
    rng = np.random.default_rng(seed)
    base = default_projection()
    projection = ProjectionParams(
        f=base.f * (1.0 + 0.05 * rng.uniform(-1, 1)),
        pitch=base.pitch + 0.1 * rng.uniform(-1, 1),
        yaw=0.2 * rng.uniform(-1, 1),
        roll=0.1 * rng.uniform(-1, 1),
        tx=base.tx + rng.uniform(-2, 2),
        ty=base.ty + rng.uniform(-2, 2),
    )
    coeffs = default_light().coeffs.copy()
    coeffs[:, 1:4] += 0.1 * rng.uniform(-1, 1, size=(3, 3))
    f_s = scale * rng.normal(size=model.shape_model.param_dim)
    f_a = scale * rng.normal(size=model.albedo_model.param_dim)
    return projection, SHLighting(coeffs=coeffs), f_s, f_a


def synthetic_landmarks(
    shape: VertexShape, projection: ProjectionParams, topology: Topology
) -> LandmarkSet:
    """Project the landmark vertices of a shape; every point is visible."""
    coords = project(shape, projection).coords
    return LandmarkSet(points=coords[topology.landmark_indices])
