"""Tests for spherical-harmonics shading."""

import numpy as np
import pytest

from uvface.core.lighting import (
    SH_C1,
    SH_C20,
    sh_basis,
    sh_basis_array,
    shade,
    shade_backward,
    shading,
)
from uvface.errors import DomainError, ShapeMismatchError
from uvface.models.lighting import SH_C0, SHLighting
from uvface.models.mesh import UVAlbedoMap, UVNormalMap
from uvface.utils.gradcheck import check_shade


def _maps(normal, albedo=0.5, size=(2, 3)):
    mask = np.ones(size, dtype=bool)
    normals = UVNormalMap(data=np.broadcast_to(normal, size + (3,)).copy(), mask=mask)
    return UVAlbedoMap(data=np.full(size + (3,), albedo), mask=mask), normals


class TestBasis:
    """Test the SH basis."""

    def test_up_normal(self):
        """Test H at n = (0, 0, 1)."""
        h = sh_basis(np.array([0.0, 0.0, 1.0]))
        expected = np.zeros(9)
        expected[0] = SH_C0
        expected[2] = SH_C1
        expected[6] = 2.0 * SH_C20
        np.testing.assert_allclose(h, expected)

    def test_rejects_non_unit(self):
        """Test that normals off the unit sphere are a domain error."""
        with pytest.raises(DomainError):
            sh_basis_array(np.array([[0.0, 0.0, 2.0]]))

    def test_ambient_only(self, rng):
        """Test that band-0 lighting is independent of the normal."""
        n = rng.normal(size=(5, 3))
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        values = sh_basis_array(n) @ SHLighting.ambient(2.0).coeffs.T
        np.testing.assert_allclose(values, 2.0 * SH_C0)


class TestShade:
    """Test texture composition."""

    def test_ambient_texture(self):
        """Test T = A * L0 * c0 under ambient light."""
        albedo, normals = _maps([0.0, 0.0, 1.0])
        texture = shade(albedo, normals, SHLighting.ambient(1.0))
        np.testing.assert_allclose(texture.data, 0.5 * SH_C0)

    def test_shading_map(self):
        """Test the per-texel shading factor on its own."""
        _, normals = _maps([0.0, 0.0, 1.0])
        coeffs = np.zeros((3, 9))
        coeffs[:, 2] = 1.0
        values = shading(normals, SHLighting(coeffs=coeffs)).data
        np.testing.assert_allclose(values, SH_C1)

    def test_negative_shading_is_kept(self):
        """Test that shading below zero is not clamped."""
        albedo, normals = _maps([0.0, 0.0, 1.0])
        coeffs = np.zeros((3, 9))
        coeffs[:, 2] = -1.0
        texture = shade(albedo, normals, SHLighting(coeffs=coeffs))
        assert np.all(texture.data < 0)

    def test_masked_out_texels_are_zero(self):
        """Test that texels outside the mask stay zero."""
        albedo, normals = _maps([0.0, 0.0, 1.0])
        mask = albedo.mask.copy()
        mask[0, 0] = False
        albedo = UVAlbedoMap(data=albedo.data, mask=mask)
        normals = UVNormalMap(data=normals.data, mask=mask)
        texture = shade(albedo, normals, SHLighting.ambient(1.0))
        assert np.all(texture.data[0, 0] == 0.0)

    def test_grid_mismatch(self):
        """Test that albedo and normals must share a grid."""
        albedo, _ = _maps([0.0, 0.0, 1.0])
        _, normals = _maps([0.0, 0.0, 1.0], size=(3, 3))
        with pytest.raises(ShapeMismatchError):
            shade(albedo, normals, SHLighting.ambient(1.0))

    def test_normal_gradient_is_tangent(self, rng):
        """Test that normal gradients are orthogonal to the normals."""
        n = rng.normal(size=(2, 3, 3))
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        albedo, _ = _maps([0.0, 0.0, 1.0])
        light = SHLighting(coeffs=rng.normal(size=(3, 9)))
        _, _, grad_n = shade_backward(albedo, n, light, rng.normal(size=(2, 3, 3)))
        np.testing.assert_allclose(np.sum(grad_n * n, axis=-1), 0.0, atol=1e-12)

    def test_gradients_match_finite_differences(self):
        """Test albedo, light and normal gradients."""
        row = check_shade(np.random.default_rng(2), 20)
        assert row.passed, row
