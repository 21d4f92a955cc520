"""Spherical-harmonics Lambertian shading with analytic gradients.

The 9 real SH basis functions of bands 0-2, in this order::

    H0 = c0
    H1 = c1 * y      H2 = c1 * z                  H3 = c1 * x
    H4 = c2 * x*y    H5 = c2 * y*z                H6 = c20 * (3z^2 - 1)
    H7 = c2 * x*z    H8 = c22 * (x^2 - y^2)

with c0 = 1/(2 sqrt(pi)), c1 = sqrt(3/(4 pi)), c2 = sqrt(15/(4 pi)),
c20 = sqrt(5/(16 pi)) and c22 = sqrt(15/(16 pi)).
"""

import math
from typing import Tuple, Union

import numpy as np

from ..errors import DomainError, ShapeMismatchError
from ..models.lighting import SH_C0, SHLighting
from ..models.mesh import (
    Topology,
    UVAlbedoMap,
    UVLookup,
    UVMap,
    UVNormalMap,
    UVShadingMap,
    UVTextureMap,
)
from .mesh_core import normals_to_uv, normals_to_uv_backward

SH_C1 = math.sqrt(3.0 / (4.0 * math.pi))
SH_C2 = math.sqrt(15.0 / (4.0 * math.pi))
SH_C20 = math.sqrt(5.0 / (16.0 * math.pi))
SH_C22 = math.sqrt(15.0 / (16.0 * math.pi))

UNIT_TOLERANCE = 1e-6

NormalsLike = Union[UVMap, np.ndarray]


def _check_unit(normals: np.ndarray) -> None:
    if normals.size == 0:
        return
    err = np.abs(np.linalg.norm(normals, axis=-1) - 1.0)
    if err.max() > UNIT_TOLERANCE:
        raise DomainError(f"normals must be unit length, worst |n|-1 = {err.max():.3g}")


def sh_basis_array(normals: np.ndarray) -> np.ndarray:
    """Evaluate the 9 basis functions on an (N, 3) array of unit normals."""
    normals = np.asarray(normals, dtype=np.float64)
    _check_unit(normals)
    x, y, z = normals[:, 0], normals[:, 1], normals[:, 2]
    return np.stack(
        [
            np.full_like(x, SH_C0),
            SH_C1 * y,
            SH_C1 * z,
            SH_C1 * x,
            SH_C2 * x * y,
            SH_C2 * y * z,
            SH_C20 * (3.0 * z * z - 1.0),
            SH_C2 * x * z,
            SH_C22 * (x * x - y * y),
        ],
        axis=1,
    )


def sh_basis(n: np.ndarray) -> np.ndarray:
    """The 9-vector H(n) for a single unit normal."""
    return sh_basis_array(np.asarray(n, dtype=np.float64).reshape(1, 3))[0]


def sh_basis_jacobian(normals: np.ndarray) -> np.ndarray:
    """dH/dn for an (N, 3) array of normals, shape (N, 9, 3)."""
    normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    x, y, z = normals[:, 0], normals[:, 1], normals[:, 2]
    jac = np.zeros((normals.shape[0], 9, 3))
    jac[:, 1, 1] = SH_C1
    jac[:, 2, 2] = SH_C1
    jac[:, 3, 0] = SH_C1
    jac[:, 4, 0] = SH_C2 * y
    jac[:, 4, 1] = SH_C2 * x
    jac[:, 5, 1] = SH_C2 * z
    jac[:, 5, 2] = SH_C2 * y
    jac[:, 6, 2] = 6.0 * SH_C20 * z
    jac[:, 7, 0] = SH_C2 * z
    jac[:, 7, 2] = SH_C2 * x
    jac[:, 8, 0] = 2.0 * SH_C22 * x
    jac[:, 8, 1] = -2.0 * SH_C22 * y
    return jac


def _normals_data(normals_uv: NormalsLike) -> np.ndarray:
    if isinstance(normals_uv, UVMap):
        return normals_uv.data
    return np.asarray(normals_uv, dtype=np.float64)


def _aligned(albedo: UVMap, normals_uv: NormalsLike) -> Tuple[np.ndarray, np.ndarray]:
    normals = _normals_data(normals_uv)
    if normals.shape != albedo.data.shape:
        raise ShapeMismatchError(
            f"normal map {normals.shape} does not match albedo {albedo.data.shape}"
        )
    masked = isinstance(normals_uv, UVMap)
    if masked and not np.array_equal(normals_uv.mask, albedo.mask):
        raise ShapeMismatchError("normal map and albedo masks differ")
    return albedo.mask, normals


def shading(normals_uv: UVNormalMap, light: SHLighting) -> UVShadingMap:
    """C^uv = sum_b L_b H_b(N) per texel and channel; zero outside the mask."""
    mask = normals_uv.mask
    out = np.zeros(normals_uv.data.shape)
    out[mask] = sh_basis_array(normals_uv.data[mask]) @ light.coeffs.T
    return UVShadingMap(data=out, mask=mask)


def shade(
    albedo: UVAlbedoMap, normals_uv: NormalsLike, light: SHLighting
) -> UVTextureMap:
    """
    Compose the shaded texture T^uv = A^uv * C^uv.

    Negative shading is kept; clamping only happens when an image is written.
    """
    mask, normals = _aligned(albedo, normals_uv)
    out = np.zeros(albedo.data.shape)
    out[mask] = albedo.data[mask] * (sh_basis_array(normals[mask]) @ light.coeffs.T)
    return UVTextureMap(data=out, mask=mask)


def shade_backward(
    albedo: UVAlbedoMap,
    normals_uv: NormalsLike,
    light: SHLighting,
    upstream: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Backward pass of shade.

    Normal gradients are projected onto the tangent plane of the unit sphere.

    Returns:
        (grad albedo (U, V, 3), grad light (3, 9), grad normals (U, V, 3))
    """
    mask, normals = _aligned(albedo, normals_uv)
    upstream = np.asarray(upstream, dtype=np.float64)
    n = normals[mask]
    g = upstream[mask]
    a = albedo.data[mask]
    basis = sh_basis_array(n)
    shade_values = basis @ light.coeffs.T

    grad_albedo = np.zeros(albedo.data.shape)
    grad_albedo[mask] = g * shade_values

    weighted = g * a
    grad_light = weighted.T @ basis

    grad_basis = weighted @ light.coeffs
    grad_n = np.einsum("kb,kbj->kj", grad_basis, sh_basis_jacobian(n))
    grad_n -= n * np.sum(n * grad_n, axis=1, keepdims=True)
    grad_normals = np.zeros(normals.shape)
    grad_normals[mask] = grad_n
    return grad_albedo, grad_light, grad_normals


def uv_normal_map(
    rotated_normals: np.ndarray, topo: Topology, lookup: UVLookup
) -> Tuple[UVNormalMap, np.ndarray]:
    """Resample rotated per-vertex normals to the UV grid (map, raw sums)."""
    return normals_to_uv(rotated_normals, topo, lookup)


def uv_normal_map_backward(
    sums: np.ndarray, grad_uv: np.ndarray, topo: Topology, lookup: UVLookup
) -> np.ndarray:
    """Gradient of uv_normal_map with respect to the rotated vertex normals."""
    return normals_to_uv_backward(sums, grad_uv, topo, lookup)
