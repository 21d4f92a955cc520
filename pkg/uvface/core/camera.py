"""Weak-perspective camera: rotation, projection and their Jacobians."""

import math
from typing import Optional, Tuple

import numpy as np

from ..models.camera import ProjectedVertices, ProjectionParams
from ..models.mesh import VertexShape


def _rx(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _drx(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]])


def _dry(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]])


def _drz(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


def rotation_from_angles(pitch: float, yaw: float, roll: float) -> np.ndarray:
    """
    Build R = Rz(roll) @ Ry(yaw) @ Rx(pitch).

    Model space is y-up with +z toward the viewer; image space is y-down with
    smaller depth closer, so a frontal face has pitch = pi.
    """
    return _rz(roll) @ _ry(yaw) @ _rx(pitch)


def rotation_derivatives(
    pitch: float, yaw: float, roll: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """dR/dpitch, dR/dyaw and dR/droll."""
    rx, ry, rz = _rx(pitch), _ry(yaw), _rz(roll)
    return (
        rz @ ry @ _drx(pitch),
        rz @ _dry(yaw) @ rx,
        _drz(roll) @ ry @ rx,
    )


def rotation_backward(
    angles: Tuple[float, float, float], grad_r: np.ndarray
) -> np.ndarray:
    """Angle gradients (pitch, yaw, roll) from an upstream 3x3 gradient on R."""
    return np.array([float(np.sum(grad_r * d)) for d in rotation_derivatives(*angles)])


def project(s: VertexShape, m: ProjectionParams) -> ProjectedVertices:
    """Apply f * Pr * R * s + t2d; depth is the z row of R * s."""
    rotated = s.positions @ rotation_from_angles(*m.angles).T
    return ProjectedVertices(coords=m.f * rotated[:, :2] + m.t2d, depth=rotated[:, 2])


def projection_matrix(m: ProjectionParams) -> np.ndarray:
    """The 2x4 affine camera M(m) acting on homogeneous [S; 1]."""
    matrix = np.zeros((2, 4))
    matrix[:, :3] = m.f * rotation_from_angles(*m.angles)[:2]
    matrix[:, 3] = m.t2d
    return matrix


def project_backward(
    s: VertexShape,
    m: ProjectionParams,
    grad_coords: np.ndarray,
    grad_depth: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Backward pass of project.

    Args:
        s: Vertex positions used in the forward call
        m: Projection parameters used in the forward call
        grad_coords: (Q, 2) upstream gradient on the image coordinates
        grad_depth: Optional (Q,) upstream gradient on the depth

    Returns:
        (gradient w.r.t. the (Q, 3) positions,
         gradient w.r.t. m in ProjectionParams.ORDER)
    """
    positions = s.positions
    rotation = rotation_from_angles(*m.angles)
    rotated = positions @ rotation.T
    grad_coords = np.asarray(grad_coords, dtype=np.float64)
    if grad_depth is None:
        grad_depth = np.zeros(positions.shape[0])

    grad_rotated = np.concatenate(
        [m.f * grad_coords, np.asarray(grad_depth, dtype=np.float64)[:, None]], axis=1
    )
    grad_positions = grad_rotated @ rotation
    grad_r = grad_rotated.T @ positions

    grad_m = np.zeros(6)
    grad_m[0] = float(np.sum(grad_coords * rotated[:, :2]))
    grad_m[1:4] = rotation_backward(m.angles, grad_r)
    grad_m[4:6] = grad_coords.sum(axis=0)
    return grad_positions, grad_m
