"""Tests for the weak-perspective camera."""

import math

import numpy as np
import pytest

from uvface.core.camera import (
    project,
    project_backward,
    projection_matrix,
    rotation_backward,
    rotation_from_angles,
)
from uvface.models.camera import ProjectionParams
from uvface.models.mesh import VertexShape
from uvface.utils.gradcheck import check_project


class TestRotation:
    """Test rotation construction."""

    def test_zero_angles(self):
        """Test that zero angles give the identity."""
        np.testing.assert_allclose(rotation_from_angles(0.0, 0.0, 0.0), np.eye(3))

    def test_is_orthonormal(self):
        """Test R^T R = I and det R = 1."""
        r = rotation_from_angles(0.3, -0.7, 1.1)
        np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-12)
        assert np.linalg.det(r) == pytest.approx(1.0)

    def test_composition_order(self):
        """Test that pitch is applied first and roll last."""
        pitch_only = rotation_from_angles(0.4, 0.0, 0.0)
        yaw_only = rotation_from_angles(0.0, 0.5, 0.0)
        roll_only = rotation_from_angles(0.0, 0.0, 0.6)
        np.testing.assert_allclose(
            rotation_from_angles(0.4, 0.5, 0.6), roll_only @ yaw_only @ pitch_only
        )

    def test_frontal_pitch_flips_y_and_z(self):
        """Test that pitch = pi turns y-up into y-down and +z into closer depth."""
        r = rotation_from_angles(math.pi, 0.0, 0.0)
        np.testing.assert_allclose(r @ [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(r @ [0.0, 0.0, 1.0], [0.0, 0.0, -1.0], atol=1e-12)

    def test_backward_matches_finite_differences(self, rng):
        """Test angle gradients of sum(G * R)."""
        angles = (0.2, -0.4, 0.9)
        g = rng.normal(size=(3, 3))
        analytic = rotation_backward(angles, g)
        h = 1e-6
        for k in range(3):
            up = list(angles)
            down = list(angles)
            up[k] += h
            down[k] -= h
            numeric = (
                np.sum(g * rotation_from_angles(*up))
                - np.sum(g * rotation_from_angles(*down))
            ) / (2 * h)
            assert analytic[k] == pytest.approx(numeric, rel=1e-6, abs=1e-8)


class TestProject:
    """Test vertex projection."""

    def test_identity_projection(self):
        """Test f * (x, y) + t and depth z with no rotation."""
        shape = VertexShape(positions=np.array([[1.0, 2.0, 3.0], [-1.0, 0.5, -2.0]]))
        m = ProjectionParams(f=2.0, tx=10.0, ty=20.0)
        out = project(shape, m)
        np.testing.assert_allclose(out.coords, [[12.0, 24.0], [8.0, 21.0]])
        np.testing.assert_allclose(out.depth, [3.0, -2.0])

    def test_frontal_view(self, projection):
        """Test that the default view puts the nose closest and upright."""
        shape = VertexShape(positions=np.array([[0.0, 0.5, 1.0], [0.0, -0.5, 1.0]]))
        out = project(shape, projection)
        assert out.coords[0, 1] < out.coords[1, 1]
        assert np.all(out.depth < 0)

    def test_matrix_agrees_with_project(self, rng):
        """Test that M(m) [S; 1] equals the projected coordinates."""
        positions = rng.normal(size=(10, 3))
        m = ProjectionParams(f=3.0, pitch=0.3, yaw=-0.2, roll=0.1, tx=5.0, ty=-4.0)
        homogeneous = np.concatenate([positions, np.ones((10, 1))], axis=1)
        expected = homogeneous @ projection_matrix(m).T
        actual = project(VertexShape(positions=positions), m).coords
        np.testing.assert_allclose(actual, expected)

    def test_translation_gradient(self, rng):
        """Test that the t2d gradient is the column sum of the upstream."""
        shape = VertexShape(positions=rng.normal(size=(4, 3)))
        grad_coords = rng.normal(size=(4, 2))
        _, grad_m = project_backward(shape, ProjectionParams(f=1.0), grad_coords)
        np.testing.assert_allclose(grad_m[4:], grad_coords.sum(axis=0))

    def test_gradients_match_finite_differences(self):
        """Test every projection gradient on random inputs."""
        row = check_project(np.random.default_rng(1), 20)
        assert row.passed, row
