"""Tests for the fitting objectives."""

import numpy as np
import pytest

from uvface.core.camera import project
from uvface.core.losses import (
    IdentityFeatureExtractor,
    albedo_constancy_loss,
    albedo_symmetry_loss,
    chromaticity,
    format_breakdown,
    format_values,
    intermediate_loss,
    isolated_texels,
    landmark_loss,
    perceptual_loss,
    recon_image_loss,
    shape_smoothness_loss,
    total_loss,
)
from uvface.errors import EmptyCoverageError, ShapeMismatchError
from uvface.models.losses import LandmarkSet, LossPart, LossWeights, PseudoGroundTruth
from uvface.models.mesh import UVMap, UVTextureMap
from uvface.utils.gradcheck import DEFAULT_TRIALS, check_losses


def _uv(data, mask=None):
    data = np.asarray(data, dtype=np.float64)
    if mask is None:
        mask = np.ones(data.shape[:2], dtype=bool)
    return UVMap(data=data, mask=mask)


def _plane(size=5):
    r, c = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    return np.stack([r, c, 2.0 * r - c], axis=-1).astype(np.float64)


class TestReconImage:
    """Test the photometric loss."""

    def test_identical_images(self, rng):
        """Test that identical images cost nothing."""
        image = rng.uniform(size=(3, 3, 3))
        value, grad = recon_image_loss(image, image, np.ones((3, 3), dtype=bool))
        assert value == 0.0
        assert np.all(grad == 0.0)

    def test_mean_pixel_distance(self):
        """Test the mean RGB distance over covered pixels."""
        rendered = np.zeros((1, 2, 3))
        rendered[0, 0] = [3.0, 4.0, 0.0]
        target = np.zeros((1, 2, 3))
        value, grad = recon_image_loss(rendered, target, np.array([[True, True]]))
        assert value == pytest.approx(2.5)
        np.testing.assert_allclose(grad[0, 0], [0.3, 0.4, 0.0])
        np.testing.assert_allclose(grad[0, 1], 0.0)

    def test_uncovered_pixels_are_ignored(self):
        """Test that pixels outside the coverage set do not count."""
        rendered = np.ones((1, 2, 3))
        target = np.zeros((1, 2, 3))
        value, grad = recon_image_loss(rendered, target, np.array([[True, False]]))
        assert value == pytest.approx(np.sqrt(3.0))
        assert np.all(grad[0, 1] == 0.0)

    def test_empty_coverage(self):
        """Test that an empty coverage set is an error."""
        with pytest.raises(EmptyCoverageError):
            recon_image_loss(np.zeros((2, 2, 3)), np.zeros((2, 2, 3)), np.zeros((2, 2)))

    def test_bare_image_needs_coverage(self):
        """Test that a bare array needs an explicit coverage set."""
        with pytest.raises(ValueError):
            recon_image_loss(np.zeros((2, 2, 3)), np.zeros((2, 2, 3)))

    def test_size_mismatch(self):
        """Test that images must share a size."""
        with pytest.raises(ShapeMismatchError):
            recon_image_loss(np.zeros((2, 2, 3)), np.zeros((3, 2, 3)), np.ones((2, 2)))


class TestPerceptual:
    """Test the feature reconstruction loss."""

    def test_disabled_without_extractor(self):
        """Test that no extractor disables the term."""
        value, grad, enabled = perceptual_loss(
            None, np.ones((2, 2, 3)), np.zeros((2, 2, 3))
        )
        assert (value, enabled) == (0.0, False)
        assert np.all(grad == 0.0)

    def test_identity_features(self):
        """Test the normalised squared distance on raw pixels."""
        value, _, enabled = perceptual_loss(
            IdentityFeatureExtractor(), np.ones((2, 2, 3)), np.zeros((2, 2, 3))
        )
        assert enabled
        assert value == pytest.approx(1.0)


class TestLandmarks:
    """Test the landmark loss."""

    def test_exact_landmarks(self, topo, mean_shape, projection):
        """Test zero loss when annotations equal the projected landmarks."""
        points = project(mean_shape, projection).coords[topo.landmark_indices]
        value, grad_m, grad_s = landmark_loss(
            projection, mean_shape, topo, LandmarkSet(points=points)
        )
        assert value == pytest.approx(0.0)
        np.testing.assert_allclose(grad_m, 0.0, atol=1e-12)
        np.testing.assert_allclose(grad_s, 0.0, atol=1e-12)

    def test_shifted_landmark(self, topo, mean_shape, projection):
        """Test one landmark off by one pixel costs one."""
        points = project(mean_shape, projection).coords[topo.landmark_indices]
        points[30, 0] += 1.0
        value, grad_m, _ = landmark_loss(
            projection, mean_shape, topo, LandmarkSet(points=points)
        )
        assert value == pytest.approx(1.0)
        assert grad_m[4] == pytest.approx(-2.0)

    def test_invisible_landmarks_do_not_count(self, topo, mean_shape, projection):
        """Test that an invisible landmark is ignored even when missing."""
        points = project(mean_shape, projection).coords[topo.landmark_indices]
        points[30] = np.nan
        visible = np.ones(68, dtype=bool)
        visible[30] = False
        value, _, _ = landmark_loss(
            projection, mean_shape, topo, LandmarkSet(points=points, visible=visible)
        )
        assert value == pytest.approx(0.0)


class TestAlbedoRegularisers:
    """Test symmetry and constancy."""

    def test_symmetric_map(self, rng):
        """Test that a mirror-symmetric map costs nothing."""
        half = rng.uniform(size=(3, 2, 3))
        data = np.concatenate([half, half[:, ::-1]], axis=1)
        value, grad = albedo_symmetry_loss(_uv(data))
        assert value == 0.0
        assert np.all(grad == 0.0)

    def test_asymmetric_map(self):
        """Test the L1 distance to the mirror image."""
        data = np.zeros((1, 2, 3))
        data[0, 0, 0] = 1.0
        value, grad = albedo_symmetry_loss(_uv(data))
        assert value == pytest.approx(2.0)
        assert grad[0, 0, 0] == 2.0
        assert grad[0, 1, 0] == -2.0

    def test_constant_albedo_is_free(self, rng):
        """Test that equal neighbours cost exactly zero."""
        albedo = _uv(np.full((4, 4, 3), 0.5))
        ref = _uv(rng.uniform(size=(4, 4, 3)))
        value, grad = albedo_constancy_loss(albedo, ref, 15.0, 0.8)
        assert value == 0.0
        assert np.all(grad == 0.0)

    def test_same_chromaticity_pair(self):
        """Test the two-texel value for p = 1 with identical chromaticity."""
        albedo = _uv(np.array([[[0.2, 0.2, 0.2], [0.5, 0.6, 0.2]]]))
        ref = _uv(np.ones((1, 2, 3)))
        value, _ = albedo_constancy_loss(albedo, ref, 15.0, 1.0)
        assert value == pytest.approx(2.0 * 0.5, abs=1e-5)

    def test_chromaticity_edges_are_cheaper(self):
        """Test that a colour edge in the reference lowers the cost."""
        albedo = _uv(np.array([[[0.2, 0.2, 0.2], [0.5, 0.6, 0.2]]]))
        flat, _ = albedo_constancy_loss(albedo, _uv(np.ones((1, 2, 3))), 15.0, 0.8)
        ref = _uv(np.array([[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]]))
        edge, _ = albedo_constancy_loss(albedo, ref, 15.0, 0.8)
        assert edge < flat

    def test_exponent_range(self):
        """Test that p outside (0, 1] is rejected."""
        albedo = _uv(np.zeros((2, 2, 3)))
        with pytest.raises(ValueError):
            albedo_constancy_loss(albedo, albedo, 15.0, 1.5)

    def test_chromaticity(self):
        """Test unit-norm colours and zero for black."""
        c = chromaticity(np.array([[3.0, 4.0, 0.0], [0.0, 0.0, 0.0]]))
        np.testing.assert_allclose(c, [[0.6, 0.8, 0.0], [0.0, 0.0, 0.0]])


class TestSmoothness:
    """Test the UV shape smoothness term."""

    def test_plane_interior(self):
        """Test that an affine position map has zero interior Laplacian."""
        value, grad = shape_smoothness_loss(_uv(_plane()), boundary="interior")
        assert value == pytest.approx(0.0)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_plane_clipped_border(self):
        """Test that clipped border neighbourhoods see a one-sided mean."""
        value, _ = shape_smoothness_loss(_uv(_plane()), boundary="clip")
        assert value > 0.0

    def test_unknown_boundary(self):
        """Test that only clip and interior are accepted."""
        with pytest.raises(ValueError):
            shape_smoothness_loss(_uv(_plane()), boundary="wrap")

    def test_isolated_texels(self):
        """Test counting texels without masked-in neighbours."""
        mask = np.zeros((4, 4), dtype=bool)
        mask[0, 0] = True
        mask[2, 2] = mask[2, 3] = True
        assert isolated_texels(mask) == 1


class TestIntermediate:
    """Test the supervised loss against pseudo ground truth."""

    def test_zero_at_ground_truth(self, mean_shape, projection):
        """Test that matching predictions cost nothing."""
        mask = np.ones((3, 3), dtype=bool)
        texture = UVTextureMap(data=np.ones((3, 3, 3)), mask=mask)
        gt = PseudoGroundTruth(shape=mean_shape, projection=projection, texture=texture)
        weights = LossWeights()
        value, grads = intermediate_loss(mean_shape, texture, projection, gt, weights)
        assert value == 0.0
        assert set(grads) == {"shape", "texture", "projection"}

    def test_invalid_texels_are_ignored(self, mean_shape, projection):
        """Test that texels outside the pseudo ground-truth mask do not count."""
        mask = np.ones((3, 3), dtype=bool)
        mask[1, 1] = False
        gt = PseudoGroundTruth(
            shape=mean_shape,
            projection=projection,
            texture=UVTextureMap(data=np.ones((3, 3, 3)), mask=mask),
        )
        pred = np.ones((3, 3, 3))
        pred[1, 1] = 5.0
        weights = LossWeights()
        value, _ = intermediate_loss(mean_shape, _uv(pred), projection, gt, weights)
        assert value == 0.0


class TestTotal:
    """Test loss aggregation."""

    def test_weighted_sum(self):
        """Test weights, disabled parts and shared blocks."""
        weights = LossWeights(lambda_L=0.5)
        parts = [
            LossPart(name="recon_image", value=2.0, grads={"f_A": np.ones(2)}),
            LossPart(name="landmark", value=4.0, grads={"f_A": np.ones(2)}),
            LossPart(name="recon_feature", value=9.0, enabled=False),
        ]
        value, grads = total_loss(parts, weights)
        assert value == pytest.approx(4.0)
        np.testing.assert_allclose(grads["f_A"], [1.5, 1.5])

    def test_intermediate_weights(self):
        """Test that the intermediate objective swaps in its own landmark weight."""
        weights = LossWeights(lambda_L=0.5, lambda_L0=0.25)
        parts = [LossPart(name="landmark", value=4.0)]
        assert total_loss(parts, weights, intermediate=True)[0] == pytest.approx(1.0)

    def test_breakdown_text(self):
        """Test the name=value listing."""
        parts = [LossPart(name="recon_image", value=2.0)]
        text = format_breakdown(parts, LossWeights())
        assert text.splitlines() == ["recon_image=2.0", "total=2.0"]

    def test_values_text(self):
        """Test that values keep their order and full precision."""
        text = format_values({"landmark": 0.1, "total": 1e-17})
        assert text.splitlines() == ["landmark=0.1", "total=1e-17"]

    def test_gradients_match_finite_differences(self, model):
        """Test every loss gradient."""
        rows = check_losses(model, np.random.default_rng(5), DEFAULT_TRIALS)
        assert all(row.passed for row in rows), rows
