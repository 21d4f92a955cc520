"""Mesh topology helpers, UV parameterisation and bilinear UV sampling."""

import logging
import math
from typing import Tuple, Union

import numpy as np

from ..errors import DegenerateGeometryError, DomainError, SampleRangeError
from ..models.mesh import (
    Topology,
    UnwrapConstants,
    UVLookup,
    UVMap,
    UVNormalMap,
    UVShapeMap,
    VertexShape,
)

logger = logging.getLogger(__name__)

ArrayOrMap = Union[np.ndarray, UVMap]

# containment slack for texel lookups, relative to the triangle's doubled area
INCLUSIVE_EPS = 1e-9


def cylindrical_unwrap(point: np.ndarray, c: UnwrapConstants) -> Tuple[float, float]:
    """
    Project a 3D point onto the UV grid with the cylindrical unwrap.

    Args:
        point: (x, y, z) position
        c: Unwrap scale and translation constants

    Returns:
        The (u, v) texel coordinate
    """
    x, y, z = (float(value) for value in point)
    if x == 0.0 and z == 0.0:
        raise DomainError(f"cylindrical unwrap is undefined on the axis, got {point}")
    return (c.alpha2 * y + c.beta2, c.alpha1 * math.atan2(x, z) + c.beta1)


def unwrap_vertices(positions: np.ndarray, c: UnwrapConstants) -> np.ndarray:
    """Vectorised cylindrical unwrap of a (Q, 3) array to (Q, 2) texel coords."""
    positions = np.asarray(positions, dtype=np.float64)
    x, y, z = positions[:, 0], positions[:, 1], positions[:, 2]
    on_axis = np.flatnonzero((x == 0.0) & (z == 0.0))
    if on_axis.size:
        raise DomainError(
            f"cylindrical unwrap is undefined for vertex {int(on_axis[0])} on the axis"
        )
    return np.stack([c.alpha2 * y + c.beta2, c.alpha1 * np.arctan2(x, z) + c.beta1], 1)


def _map_data(map_or_array: ArrayOrMap) -> np.ndarray:
    if isinstance(map_or_array, UVMap):
        return map_or_array.data
    data = np.asarray(map_or_array, dtype=np.float64)
    return data if data.ndim == 3 else data[..., None]


def _bilinear_cells(
    points: np.ndarray, size: Tuple[int, int]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Lower cell corner and fractional offsets for each (u, v) point."""
    rows, cols = size
    u, v = points[:, 0], points[:, 1]
    bad = ~(
        np.isfinite(u)
        & np.isfinite(v)
        & (u >= 0)
        & (v >= 0)
        & (u <= rows - 1)
        & (v <= cols - 1)
    )
    if np.any(bad):
        first = points[np.flatnonzero(bad)[0]]
        raise SampleRangeError(
            f"sample point {tuple(first)} outside [0,{rows - 1}]x[0,{cols - 1}]"
        )
    u0 = np.floor(u).astype(np.int64)
    v0 = np.floor(v).astype(np.int64)
    # points on the last row/column use the cell below them
    u0 = np.minimum(u0, max(rows - 2, 0))
    v0 = np.minimum(v0, max(cols - 2, 0))
    return u0, v0, u - u0, v - v0


def _neighbours(
    data: np.ndarray, u0: np.ndarray, v0: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    rows, cols = data.shape[:2]
    u1 = np.minimum(u0 + 1, rows - 1)
    v1 = np.minimum(v0 + 1, cols - 1)
    return data[u0, v0], data[u1, v0], data[u0, v1], data[u1, v1]


def sample_uv(map_or_array: ArrayOrMap, p: np.ndarray) -> np.ndarray:
    """
    Bilinearly sample a UV map at continuous (u, v) coordinates.

    Args:
        map_or_array: UV map or (U, V, C) array
        p: A single (u, v) point or an (N, 2) array of points

    Returns:
        (C,) for a single point, (N, C) otherwise
    """
    data = _map_data(map_or_array)
    points = np.asarray(p, dtype=np.float64)
    single = points.ndim == 1
    points = points.reshape(-1, 2)
    u0, v0, du, dv = _bilinear_cells(points, data.shape[:2])
    t00, t10, t01, t11 = _neighbours(data, u0, v0)
    du, dv = du[:, None], dv[:, None]
    values = (
        t00 * (1 - du) * (1 - dv)
        + t10 * du * (1 - dv)
        + t01 * (1 - du) * dv
        + t11 * du * dv
    )
    return values[0] if single else values


def sample_uv_backward(
    map_or_array: ArrayOrMap, p: np.ndarray, upstream: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Backward pass of sample_uv.

    Coordinate gradients are the partials of the bilinear interpolant inside the
    cell used by the forward pass; on an integer line that is the cell to the
    right (or below), i.e. the right-sided derivative. The last row/column uses
    the cell before it.

    Returns:
        (gradient w.r.t. the map, same shape as its data;
         gradient w.r.t. p, same shape as p)
    """
    data = _map_data(map_or_array)
    points = np.asarray(p, dtype=np.float64)
    single = points.ndim == 1
    points = points.reshape(-1, 2)
    grad_out = np.asarray(upstream, dtype=np.float64).reshape(
        points.shape[0], data.shape[2]
    )
    u0, v0, du, dv = _bilinear_cells(points, data.shape[:2])
    rows, cols = data.shape[:2]
    u1 = np.minimum(u0 + 1, rows - 1)
    v1 = np.minimum(v0 + 1, cols - 1)

    grad_map = np.zeros_like(data)
    du_c, dv_c = du[:, None], dv[:, None]
    np.add.at(grad_map, (u0, v0), grad_out * (1 - du_c) * (1 - dv_c))
    np.add.at(grad_map, (u1, v0), grad_out * du_c * (1 - dv_c))
    np.add.at(grad_map, (u0, v1), grad_out * (1 - du_c) * dv_c)
    np.add.at(grad_map, (u1, v1), grad_out * du_c * dv_c)

    t00, t10, t01, t11 = _neighbours(data, u0, v0)
    d_du = (1 - dv_c) * (t10 - t00) + dv_c * (t11 - t01)
    d_dv = (1 - du_c) * (t01 - t00) + du_c * (t11 - t10)
    grad_p = np.stack(
        [np.sum(grad_out * d_du, axis=1), np.sum(grad_out * d_dv, axis=1)], axis=1
    )
    if isinstance(map_or_array, np.ndarray) and map_or_array.ndim == 2:
        grad_map = grad_map[..., 0]
    return grad_map, (grad_p[0] if single else grad_p)


def _cross2(
    ax: np.ndarray, ay: np.ndarray, bx: np.ndarray, by: np.ndarray
) -> np.ndarray:
    return ax * by - ay * bx


def cover_grid(
    points: np.ndarray,
    triangles: np.ndarray,
    width: int,
    height: int,
    offset: float,
    inclusive: bool = False,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Enumerate (triangle, grid point) pairs where the point lies in the triangle.

    Grid point (col, row) sits at (col + offset, row + offset). Strict mode
    applies the top-left fill rule to points exactly on an edge; inclusive mode
    accepts every point on or inside the triangle.

    Args:
        points: (Q, 2) vertex positions as (x, y)
        triangles: (T, 3) vertex indices
        width: Grid columns
        height: Grid rows
        offset: Sample position inside each cell
        inclusive: Use closed containment instead of the fill rule

    Returns:
        (triangle ids (K,), flat grid indices (K,), barycentric weights (K, 3))
    """
    a = points[triangles[:, 0]]
    b = points[triangles[:, 1]]
    c = points[triangles[:, 2]]
    ab, ac = b - a, c - a
    area2 = _cross2(ab[:, 0], ab[:, 1], ac[:, 0], ac[:, 1])

    corners = np.stack([a, b, c], axis=1)
    lo = corners.min(axis=1)
    hi = corners.max(axis=1)
    slack = INCLUSIVE_EPS if inclusive else 0.0
    col0 = np.maximum(np.ceil(lo[:, 0] - offset - slack), 0).astype(np.int64)
    row0 = np.maximum(np.ceil(lo[:, 1] - offset - slack), 0).astype(np.int64)
    col1 = np.minimum(np.floor(hi[:, 0] - offset + slack), width - 1).astype(np.int64)
    row1 = np.minimum(np.floor(hi[:, 1] - offset + slack), height - 1).astype(np.int64)
    ncols = np.maximum(col1 - col0 + 1, 0)
    nrows = np.maximum(row1 - row0 + 1, 0)
    counts = np.where(area2 != 0, ncols * nrows, 0)

    total = int(counts.sum())
    if total == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros((0, 3))

    tri = np.repeat(np.arange(triangles.shape[0]), counts)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    k = np.arange(total) - starts
    span = np.repeat(ncols, counts)
    col = np.repeat(col0, counts) + k % span
    row = np.repeat(row0, counts) + k // span
    px = col + offset
    py = row + offset

    ta, tb, tc = a[tri], b[tri], c[tri]
    w0 = _cross2(tb[:, 0] - px, tb[:, 1] - py, tc[:, 0] - px, tc[:, 1] - py)
    w1 = _cross2(tc[:, 0] - px, tc[:, 1] - py, ta[:, 0] - px, ta[:, 1] - py)
    w2 = _cross2(ta[:, 0] - px, ta[:, 1] - py, tb[:, 0] - px, tb[:, 1] - py)
    area = area2[tri]
    sign = np.sign(area)
    weights = np.stack([w0, w1, w2], axis=1) * sign[:, None]

    if inclusive:
        inside = np.all(weights >= -INCLUSIVE_EPS * np.abs(area)[:, None], axis=1)
    else:
        # edge i runs between the two vertices other than i
        starts_xy = np.stack([tb, tc, ta], axis=1)
        ends_xy = np.stack([tc, ta, tb], axis=1)
        direction = (ends_xy - starts_xy) * sign[:, None, None]
        top_left = (direction[..., 1] < 0) | (
            (direction[..., 1] == 0) & (direction[..., 0] > 0)
        )
        inside = np.all((weights > 0) | ((weights == 0) & top_left), axis=1)

    tri = tri[inside]
    flat = (row * width + col)[inside]
    bary = np.stack([w0, w1, w2], axis=1)[inside] / area[inside][:, None]
    if inclusive:
        bary = np.clip(bary, 0.0, None)
        bary /= bary.sum(axis=1, keepdims=True)
    return tri, flat, bary


def first_per_cell(cells: np.ndarray, keys: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Index of the entry with the smallest (key, tri) for every distinct cell."""
    if cells.size == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((tri, keys, cells))
    sorted_cells = cells[order]
    first = np.ones(order.size, dtype=bool)
    first[1:] = sorted_cells[1:] != sorted_cells[:-1]
    return order[first]


def uv_lookup(topo: Topology) -> UVLookup:
    """
    Locate the UV triangle enclosing every texel.

    Texels on shared edges go to the lowest triangle index. The lookup is the
    barycentric machinery behind S^uv and UV normal maps.
    """
    rows, cols = topo.uv_shape
    xy = topo.uv_coords[:, ::-1]
    tri, flat, bary = cover_grid(xy, topo.triangles, cols, rows, 0.0, inclusive=True)
    keep = first_per_cell(flat, np.zeros(flat.size), tri)

    tri_id = np.full(rows * cols, -1, dtype=np.int64)
    weights = np.zeros((rows * cols, 3))
    tri_id[flat[keep]] = tri[keep]
    weights[flat[keep]] = bary[keep]
    logger.debug("UV lookup covers %d of %d texels", keep.size, rows * cols)
    return UVLookup(
        tri_id=tri_id.reshape(rows, cols), bary=weights.reshape(rows, cols, 3)
    )


def vertex_to_uv(values: np.ndarray, topo: Topology, lookup: UVLookup) -> np.ndarray:
    """Interpolate a per-vertex attribute (Q, C) onto the UV grid (U, V, C)."""
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros(lookup.shape + (values.shape[1],))
    mask = lookup.mask
    corners = topo.triangles[lookup.tri_id[mask]]
    bary = lookup.bary[mask]
    out[mask] = np.einsum("ki,kic->kc", bary, values[corners])
    return out


def vertex_to_uv_backward(
    grad_uv: np.ndarray, topo: Topology, lookup: UVLookup
) -> np.ndarray:
    """Scatter a (U, V, C) gradient back onto the (Q, C) vertex attribute."""
    mask = lookup.mask
    corners = topo.triangles[lookup.tri_id[mask]]
    bary = lookup.bary[mask]
    grad = np.zeros((topo.num_vertices, grad_uv.shape[-1]))
    g = grad_uv[mask]
    for i in range(3):
        np.add.at(grad, corners[:, i], bary[:, i, None] * g)
    return grad


def shape_to_uv(shape: VertexShape, topo: Topology, lookup: UVLookup) -> UVShapeMap:
    """Embed vertex positions into the UV grid as S^uv."""
    data = vertex_to_uv(shape.positions, topo, lookup)
    return UVShapeMap(data=data, mask=lookup.mask)


def shape_from_uv(s: UVShapeMap, topo: Topology) -> VertexShape:
    """Read each vertex position from S^uv at its UV coordinate."""
    return VertexShape(positions=sample_uv(s, topo.uv_coords))


def _face_normals(positions: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = positions[triangles[:, 0]]
    return np.cross(positions[triangles[:, 1]] - a, positions[triangles[:, 2]] - a)


def _normal_sums(positions: np.ndarray, topo: Topology) -> np.ndarray:
    faces = _face_normals(positions, topo.triangles)
    sums = np.zeros_like(positions)
    for i in range(3):
        np.add.at(sums, topo.triangles[:, i], faces)
    return sums


def vertex_normals(s: VertexShape, topo: Topology) -> np.ndarray:
    """
    Area-weighted unit vertex normals.

    Face normals follow counter-clockwise winding; each vertex averages the
    unnormalised normals of its incident triangles.
    """
    sums = _normal_sums(s.positions, topo)
    norms = np.linalg.norm(sums, axis=1)
    degenerate = np.flatnonzero(norms <= np.finfo(np.float64).tiny)
    if degenerate.size:
        vertex = int(degenerate[0])
        raise DegenerateGeometryError(
            f"vertex {vertex} has a zero-area triangle star", vertex=vertex
        )
    return sums / norms[:, None]


def normalize_backward(sums: np.ndarray, grad_unit: np.ndarray) -> np.ndarray:
    """Gradient through x -> x / |x| along the last axis."""
    norms = np.linalg.norm(sums, axis=-1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    unit = sums / safe
    radial = np.sum(unit * grad_unit, axis=-1, keepdims=True)
    return np.where(norms > 0, (grad_unit - unit * radial) / safe, 0.0)


def vertex_normals_backward(
    s: VertexShape, topo: Topology, upstream: np.ndarray
) -> np.ndarray:
    """Gradient of sum(upstream * vertex_normals(s)) with respect to positions."""
    positions = s.positions
    grad_sums = normalize_backward(_normal_sums(positions, topo), upstream)
    tris = topo.triangles
    grad_faces = grad_sums[tris[:, 0]] + grad_sums[tris[:, 1]] + grad_sums[tris[:, 2]]
    a = positions[tris[:, 0]]
    edge1 = positions[tris[:, 1]] - a
    edge2 = positions[tris[:, 2]] - a
    # d(e1 x e2): e1 gets e2 x g, e2 gets g x e1
    grad_e1 = np.cross(edge2, grad_faces)
    grad_e2 = np.cross(grad_faces, edge1)
    grad = np.zeros_like(positions)
    np.add.at(grad, tris[:, 1], grad_e1)
    np.add.at(grad, tris[:, 2], grad_e2)
    np.add.at(grad, tris[:, 0], -(grad_e1 + grad_e2))
    return grad


def normals_to_uv(
    normals: np.ndarray, topo: Topology, lookup: UVLookup
) -> Tuple[UVNormalMap, np.ndarray]:
    """
    Resample per-vertex unit normals to a UV normal map.

    Returns:
        (the renormalised UV normal map, the unnormalised per-texel sums)
    """
    sums = vertex_to_uv(normals, topo, lookup)
    norms = np.linalg.norm(sums, axis=-1, keepdims=True)
    unit = np.where(norms > 0, sums / np.where(norms > 0, norms, 1.0), 0.0)
    return UVNormalMap(data=unit, mask=lookup.mask), sums


def normals_to_uv_backward(
    sums: np.ndarray, grad_uv: np.ndarray, topo: Topology, lookup: UVLookup
) -> np.ndarray:
    """Gradient of a UV normal map with respect to the per-vertex normals."""
    return vertex_to_uv_backward(normalize_backward(sums, grad_uv), topo, lookup)


def flip_uv(data: np.ndarray) -> np.ndarray:
    """Horizontal flip of a UV map (mirror across the v axis)."""
    return np.asarray(data)[:, ::-1]
