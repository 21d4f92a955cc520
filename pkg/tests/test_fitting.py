"""Tests for the optimiser, decoders and fitting routines."""

import math

import numpy as np
import pytest

from uvface.core.camera import project, rotation_from_angles
from uvface.core.lighting import shade, uv_normal_map
from uvface.core.mesh_core import vertex_normals
from uvface.core.rasterizer import Renderer
from uvface.errors import (
    DomainError,
    EmptyCoverageError,
    FitDivergedError,
    ShapeMismatchError,
)
from uvface.fitting import (
    GradientDescent,
    TwoLayerDecoder,
    bbox_size,
    decode_albedo,
    fit_albedo_lighting,
    fit_image,
    fit_shape,
    initial_projection,
    landmark_nme,
    linear_decode,
    neutral_light,
    nme,
    pseudo_ground_truth,
    relight,
    relight_texture,
    truncate,
)
from uvface.fitting.fitter import ImageObjective
from uvface.models.camera import ProjectionParams
from uvface.models.fitting import FitConfig
from uvface.models.lighting import SHLighting
from uvface.models.losses import LossWeights, PseudoGroundTruth
from uvface.models.mesh import UVTextureMap, VertexShape
from uvface.models.render import OcclusionMask
from uvface.utils.gradcheck import check_decoder
from uvface.utils.synthetic import synthetic_landmarks, synthetic_params


def _quadratic(target):
    def objective(blocks):
        diff = blocks["x"] - target
        return float(np.sum(diff * diff)), {"x": 2.0 * diff}

    return objective


class TestGradientDescent:
    """Test the block-wise descent loop."""

    def test_quadratic_converges(self):
        """Test that a convex quadratic reaches its minimum monotonically."""
        descent = GradientDescent(FitConfig(step_size=0.1)).minimize(
            _quadratic(np.array([3.0, -1.0])), {"x": np.zeros(2)}, {"x": 1.0}
        )
        np.testing.assert_allclose(descent.params["x"], [3.0, -1.0], atol=1e-5)
        assert descent.termination == "converged"
        assert all(b <= a for a, b in zip(descent.trace, descent.trace[1:]))

    def test_no_parameters(self):
        """Test that an empty block selection returns the input."""
        descent = GradientDescent(FitConfig()).minimize(
            _quadratic(np.ones(2)), {"x": np.zeros(2)}, {}
        )
        assert descent.termination == "no_parameters"
        assert descent.params["x"].tolist() == [0.0, 0.0]

    def test_already_at_minimum(self):
        """Test that a zero initial loss stops before any iteration."""
        descent = GradientDescent(FitConfig()).minimize(
            _quadratic(np.ones(2)), {"x": np.ones(2)}, {"x": 1.0}
        )
        assert descent.termination == "converged"
        assert descent.iterations == 0
        assert descent.trace == [0.0]

    def test_ascent_direction_underflows(self):
        """Test that a gradient pointing uphill ends in step underflow."""

        def objective(blocks):
            x = float(blocks["x"][0])
            return x * x, {"x": np.array([-1.0])}

        cfg = FitConfig(max_halvings=3)
        descent = GradientDescent(cfg).minimize(
            objective, {"x": np.array([1.0])}, {"x": 1.0}
        )
        assert descent.termination == "step_underflow"
        assert descent.params["x"].tolist() == [1.0]
        assert descent.rejected_steps == 4

    def test_diverges_when_every_trial_fails(self):
        """Test that repeated failed trials raise with the trace so far."""
        calls = {"count": 0}

        def objective(blocks):
            calls["count"] += 1
            if calls["count"] > 1:
                raise ValueError("not finite")
            return 1.0, {"x": np.ones(1)}

        cfg = FitConfig(max_halvings=0, divergence_patience=2)
        with pytest.raises(FitDivergedError) as info:
            GradientDescent(cfg).minimize(objective, {"x": np.zeros(1)}, {"x": 1.0})
        assert info.value.trace == [1.0, 1.0, 1.0]

    def test_non_finite_start(self):
        """Test that the initial point must evaluate."""

        def objective(blocks):
            return math.nan, {}

        with pytest.raises(FitDivergedError):
            GradientDescent(FitConfig()).minimize(
                objective, {"x": np.zeros(1)}, {"x": 1.0}
            )

    @pytest.mark.parametrize("patience", [1, 3])
    def test_stops_after_consecutive_stalls(self, patience):
        """Test that only a run of small-progress iterations ends the loop."""

        def objective(blocks):
            return 10.0 - 1e-9 * float(blocks["x"][0]), {"x": np.array([-1.0])}

        cfg = FitConfig(relative_tolerance=1e-6, stall_patience=patience)
        descent = GradientDescent(cfg).minimize(
            objective, {"x": np.zeros(1)}, {"x": 1.0}
        )
        assert descent.termination == "converged"
        assert descent.iterations == patience
        assert descent.trace[-1] < descent.trace[0]


class TestDecoders:
    """Test parameter decoders."""

    def test_linear(self, model):
        """Test the linear decoder and truncation."""
        linear = model.shape_model
        np.testing.assert_allclose(
            linear_decode(linear, np.zeros(linear.param_dim)), linear.mean
        )
        assert truncate(linear, 3).param_dim == 3

    def test_two_layer_parameter_count(self):
        """Test that the two-layer decoder checks its input size."""
        decoder = TwoLayerDecoder.random(4, 6, 9)
        assert decoder.decode(np.zeros(4)).shape == (9,)
        with pytest.raises(ShapeMismatchError):
            decoder.decode(np.zeros(3))

    def test_two_layer_layer_sizes(self):
        """Test that mismatched layers are rejected."""
        with pytest.raises(ShapeMismatchError):
            TwoLayerDecoder(
                np.zeros((3, 2)), np.zeros(4), np.zeros((5, 3)), np.zeros(5)
            )

    def test_two_layer_gradients(self):
        """Test the backward pass against finite differences."""
        row = check_decoder(np.random.default_rng(6), 10)
        assert row.passed, row


class TestMetrics:
    """Test evaluation metrics."""

    def test_nme(self):
        """Test the mean distance over the normaliser."""
        pred = np.array([[0.0, 0.0], [3.0, 4.0]])
        gt = np.zeros((2, 2))
        assert nme(pred, gt, 2.5) == pytest.approx(1.0)

    def test_nme_bad_normaliser(self):
        """Test that the normaliser must be positive."""
        with pytest.raises(DomainError):
            nme(np.zeros((2, 2)), np.zeros((2, 2)), 0.0)

    def test_bbox_size(self):
        """Test sqrt(width * height)."""
        assert bbox_size(np.array([[0.0, 0.0], [4.0, 9.0]])) == pytest.approx(6.0)

    def test_landmark_nme_at_truth(self, topo, mean_shape, projection):
        """Test zero error for exact landmarks under both normalisers."""
        gt = synthetic_landmarks(mean_shape, projection, topo)
        assert landmark_nme(projection, mean_shape, topo, gt) == pytest.approx(0.0)
        assert landmark_nme(
            projection, mean_shape, topo, gt, metric="bbox"
        ) == pytest.approx(0.0)


class TestInitialProjection:
    """Test the starting camera heuristic."""

    def test_from_landmarks(self, topo, mean_shape, projection):
        """Test that frontal landmarks give back scale and translation."""
        gt = synthetic_landmarks(mean_shape, projection, topo)
        m = initial_projection(mean_shape, topo, 64, 64, gt)
        assert m.f == pytest.approx(projection.f)
        assert m.tx == pytest.approx(projection.tx)
        assert m.ty == pytest.approx(projection.ty)
        assert m.pitch == pytest.approx(math.pi)

    def test_centred_without_landmarks(self, topo, mean_shape):
        """Test that the face is centred and spans the default fill."""
        m = initial_projection(mean_shape, topo, 64, 48)
        coords = project(mean_shape, m).coords
        extent = coords.max(axis=0) - coords.min(axis=0)
        centre = 0.5 * (coords.max(axis=0) + coords.min(axis=0))
        assert extent.max() == pytest.approx(0.6 * 48)
        np.testing.assert_allclose(centre, [32.0, 24.0])


class TestFitShape:
    """Test fitting shape parameters to a scan."""

    def test_recovers_linear_parameters(self, model, topo):
        """Test recovery of f_S from an in-span target."""
        truth = np.linspace(-0.5, 0.5, model.shape_model.param_dim)
        target = VertexShape.from_flat(model.shape_model.decode(truth))
        cfg = FitConfig(normal_weight=0.0)
        result = fit_shape(target, model.shape_model, topo, cfg)
        np.testing.assert_allclose(result.f_S, truth, atol=1e-4)
        assert result.nme < 1e-4
        assert result.is_monotone

    def test_more_bases_fit_better(self, model, topo):
        """Test that the residual NME shrinks as bases are added."""
        truth = np.linspace(-0.5, 0.5, model.shape_model.param_dim)
        target = VertexShape.from_flat(model.shape_model.decode(truth))
        cfg = FitConfig(normal_weight=0.0)
        errors = [
            fit_shape(target, truncate(model.shape_model, k), topo, cfg).nme
            for k in (2, 4, 8)
        ]
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 1e-4

    def test_normal_term_keeps_exact_fit(self, model, topo):
        """Test that the normal term does not move an exact solution."""
        truth = np.linspace(-0.2, 0.2, model.shape_model.param_dim)
        target = VertexShape.from_flat(model.shape_model.decode(truth))
        result = fit_shape(target, model.shape_model, topo, FitConfig(), init_f_s=truth)
        np.testing.assert_allclose(result.f_S, truth, atol=1e-6)

    def test_topology_mismatch(self, model, topo):
        """Test that the scan must share the model topology."""
        with pytest.raises(ShapeMismatchError):
            scan = VertexShape(positions=np.zeros((3, 3)))
            fit_shape(scan, model.shape_model, topo, FitConfig())

    def test_shape_disabled(self, model, topo, mean_shape):
        """Test that disabling the shape block leaves f_S at zero."""
        cfg = FitConfig(fit_shape=False)
        result = fit_shape(mean_shape, model.shape_model, topo, cfg)
        assert result.termination == "no_parameters"
        assert result.f_S == [0.0] * model.shape_model.param_dim


@pytest.fixture
def frontal_normals(topo, lookup, mean_shape, projection):
    rotation = rotation_from_angles(*projection.angles)
    rotated = vertex_normals(mean_shape, topo) @ rotation.T
    normals_uv, _ = uv_normal_map(rotated, topo, lookup)
    return normals_uv


class TestFitAlbedoLighting:
    """Test fitting albedo and lighting to a UV texture."""

    def test_reduces_texture_error(self, model, topo, lookup, light, frontal_normals):
        """Test a monotone and substantial decrease of the texture residual."""
        f_a = 0.3 * np.ones(model.albedo_model.param_dim)
        albedo = decode_albedo(model.albedo_model, f_a, topo, lookup)
        target = shade(albedo, frontal_normals, light)
        cfg = FitConfig(max_iterations=300)
        result = fit_albedo_lighting(
            target, frontal_normals, model.albedo_model, topo, cfg, lookup=lookup
        )
        assert result.is_monotone
        assert result.final_loss < 0.7 * result.trace[0]
        assert result.breakdown["texture_l1"] == result.final_loss

    def test_exact_start_is_converged(
        self, model, topo, lookup, light, frontal_normals
    ):
        """Test that the true parameters are already optimal."""
        f_a = np.zeros(model.albedo_model.param_dim)
        albedo = decode_albedo(model.albedo_model, f_a, topo, lookup)
        target = shade(albedo, frontal_normals, light)
        result = fit_albedo_lighting(
            target,
            frontal_normals,
            model.albedo_model,
            topo,
            FitConfig(),
            lookup=lookup,
            init_light=light,
        )
        assert result.final_loss == pytest.approx(0.0, abs=1e-12)
        assert result.termination == "converged"

    def test_out_of_span_residual(self, model, topo, lookup, light, frontal_normals):
        """Test that texels no albedo can explain leave their error as residual."""
        albedo = decode_albedo(
            model.albedo_model, np.zeros(model.albedo_model.param_dim), topo, lookup
        )
        clean = shade(albedo, frontal_normals, light)
        rows, cols = np.nonzero(clean.mask & lookup.mask)
        perturbation = np.zeros_like(clean.data)
        perturbation[rows[::40][:3], cols[::40][:3]] = 0.2
        target = UVTextureMap(data=clean.data + perturbation, mask=clean.mask)
        result = fit_albedo_lighting(
            target,
            frontal_normals,
            model.albedo_model,
            topo,
            FitConfig(),
            lookup=lookup,
            init_light=light,
        )
        region = target.mask & lookup.mask
        expected = np.abs(perturbation[region]).mean()
        assert result.final_loss == pytest.approx(expected, abs=1e-6)

    def test_warns_when_albedo_leaves_unit_range(
        self, model, topo, lookup, light, frontal_normals, caplog
    ):
        """Test that a fitted albedo outside [0, 1] is reported."""
        albedo = decode_albedo(
            model.albedo_model, np.zeros(model.albedo_model.param_dim), topo, lookup
        )
        target = shade(albedo, frontal_normals, light)
        cfg = FitConfig(fit_albedo=False, fit_lighting=False)
        with caplog.at_level("WARNING", logger="uvface.fitting.fitter"):
            fit_albedo_lighting(
                target,
                frontal_normals,
                model.albedo_model,
                topo,
                cfg,
                lookup=lookup,
                init_f_a=100.0 * np.ones(model.albedo_model.param_dim),
            )
        assert "leaves [0, 1]" in caplog.text

    def test_empty_target(self, model, topo, lookup, frontal_normals):
        """Test that a target without valid texels is rejected."""
        target = UVTextureMap(
            data=np.zeros(lookup.shape + (3,)), mask=np.zeros(lookup.shape, dtype=bool)
        )
        with pytest.raises(ValueError):
            fit_albedo_lighting(
                target,
                frontal_normals,
                model.albedo_model,
                topo,
                FitConfig(),
                lookup=lookup,
            )


@pytest.fixture
def small_scene(model, topo, mean_shape, light):
    """A 32 x 32 render of the mean face and its renderer."""
    renderer = Renderer(topo, 32, 32)
    m = ProjectionParams(f=10.0, pitch=math.pi, tx=16.0, ty=16.0)
    albedo = decode_albedo(
        model.albedo_model,
        np.zeros(model.albedo_model.param_dim),
        topo,
        renderer.lookup,
    )
    image = renderer.render(m, light, mean_shape, albedo).image.rgb
    return renderer, m, image


class TestFitImage:
    """Test the image fitting loop."""

    def test_ground_truth_is_a_fixed_point(
        self, model, topo, mean_shape, light, small_scene
    ):
        """Test that fitting from the true parameters changes nothing."""
        renderer, m, image = small_scene
        cfg = FitConfig(weights=LossWeights(lambda_reg=0.0))
        result = fit_image(
            image,
            OcclusionMask.full(32, 32),
            synthetic_landmarks(mean_shape, m, topo),
            model.shape_model,
            model.albedo_model,
            topo,
            cfg,
            init_projection=m,
            init_light=light,
            renderer=renderer,
        )
        assert result.termination == "converged"
        assert result.iterations == 0
        assert result.projection == m
        assert result.nme == pytest.approx(0.0, abs=1e-12)

    def test_descent_from_shifted_camera(
        self, model, topo, mean_shape, light, small_scene
    ):
        """Test a monotone decrease from a shifted starting camera."""
        renderer, m, image = small_scene
        start = m.model_copy(update={"tx": 17.0, "ty": 15.5})
        cfg = FitConfig(max_iterations=5, max_halvings=8, staged=False)
        result = fit_image(
            image,
            OcclusionMask.full(32, 32),
            synthetic_landmarks(mean_shape, m, topo),
            model.shape_model,
            model.albedo_model,
            topo,
            cfg,
            init_projection=start,
            init_light=light,
            renderer=renderer,
        )
        assert result.is_monotone
        assert result.final_loss < result.trace[0]
        assert "total" in result.breakdown
        assert len(result.f_S) == model.shape_model.param_dim

    def test_face_outside_image(self, model, topo, small_scene):
        """Test that a start with no covered pixel is reported."""
        renderer, m, image = small_scene
        far = m.model_copy(update={"tx": 500.0})
        with pytest.raises(EmptyCoverageError):
            fit_image(
                image,
                OcclusionMask.full(32, 32),
                None,
                model.shape_model,
                model.albedo_model,
                topo,
                FitConfig(),
                init_projection=far,
                renderer=renderer,
            )

    def test_masked_out_image_leaves_appearance(
        self, model, topo, mean_shape, light, small_scene
    ):
        """Test that with every pixel occluded only the landmarks move the fit."""
        renderer, m, image = small_scene
        start = m.model_copy(update={"tx": 17.0, "ty": 15.5})
        cfg = FitConfig(max_iterations=200, weights=LossWeights(lambda_reg=0.0))
        result = fit_image(
            image,
            OcclusionMask.full(32, 32, value=0.0),
            synthetic_landmarks(mean_shape, m, topo),
            model.shape_model,
            model.albedo_model,
            topo,
            cfg,
            init_projection=start,
            init_light=light,
            renderer=renderer,
        )
        np.testing.assert_array_equal(result.light.to_vector(), light.to_vector())
        assert result.f_A == [0.0] * model.albedo_model.param_dim
        assert result.breakdown["recon_image"] == 0.0
        assert abs(result.projection.tx - m.tx) < abs(start.tx - m.tx)
        assert abs(result.projection.ty - m.ty) < abs(start.ty - m.ty)


class TestIntermediateStage:
    """Test the supervised stage against pseudo ground truth."""

    def test_projection_gradient(
        self, model, mean_shape, mean_albedo, light, small_scene
    ):
        """Test the camera gradient when shape and texture already match."""
        renderer, m, image = small_scene
        state = renderer.render(m, light, mean_shape, mean_albedo)
        reference = m.model_copy(update={"tx": m.tx - 1.0, "ty": m.ty + 2.0})
        pseudo = PseudoGroundTruth(
            shape=mean_shape, projection=reference, texture=state.texture
        )
        objective = ImageObjective(
            renderer,
            image,
            OcclusionMask.full(32, 32),
            None,
            model.shape_model,
            model.albedo_model,
            FitConfig(),
            pseudo=pseudo,
        )
        objective.terms = {"intermediate"}
        blocks = {
            "f": np.array([m.f]),
            "angles": np.array(m.angles),
            "t2d": m.t2d,
            "light": light.to_vector(),
            "f_S": np.zeros(model.shape_model.param_dim),
            "f_A": np.zeros(model.albedo_model.param_dim),
        }
        value, grads = objective(blocks)
        lambda_m = FitConfig().weights.lambda_m
        assert value == pytest.approx(5.0 * lambda_m)
        np.testing.assert_allclose(grads["t2d"], [2.0 * lambda_m, -4.0 * lambda_m])
        np.testing.assert_allclose(grads["f"], 0.0)
        np.testing.assert_allclose(grads["f_A"], 0.0)

    def test_pseudo_texture(self, mean_shape, light, small_scene):
        """Test that unwarping through the true camera yields usable texels."""
        renderer, m, image = small_scene
        pseudo = pseudo_ground_truth(image, mean_shape, m, renderer)
        assert pseudo.valid.sum() > 0
        assert pseudo.projection == m

    def test_pseudo_texture_outside_image(self, mean_shape, small_scene):
        """Test that a camera seeing no face cannot build pseudo ground truth."""
        renderer, m, image = small_scene
        far = m.model_copy(update={"tx": 500.0})
        with pytest.raises(EmptyCoverageError):
            pseudo_ground_truth(image, mean_shape, far, renderer)

    def test_pulls_camera_toward_reference(
        self, model, topo, mean_shape, light, small_scene
    ):
        """Test that a fit with pseudo ground truth moves toward its camera."""
        renderer, m, image = small_scene
        pseudo = pseudo_ground_truth(image, mean_shape, m, renderer)
        start = m.model_copy(update={"tx": 17.0, "ty": 15.5})
        cfg = FitConfig(
            max_iterations=50,
            fit_lighting=False,
            fit_shape=False,
            fit_albedo=False,
            weights=LossWeights(lambda_reg=0.0, lambda_reg0=0.0),
        )
        result = fit_image(
            image,
            OcclusionMask.full(32, 32),
            None,
            model.shape_model,
            model.albedo_model,
            topo,
            cfg,
            init_projection=start,
            init_light=light,
            renderer=renderer,
            pseudo=pseudo,
        )
        before = np.hypot(start.tx - m.tx, start.ty - m.ty)
        after = np.hypot(result.projection.tx - m.tx, result.projection.ty - m.ty)
        assert after < before


@pytest.fixture(scope="module")
def recovery_scene(model):
    """A random 64 x 64 face and a start with every camera parameter off."""
    truth, light, f_s, f_a = synthetic_params(model, seed=1)
    renderer = Renderer(model.topology, 64, 64)
    shape = VertexShape.from_flat(model.shape_model.decode(f_s))
    albedo = decode_albedo(model.albedo_model, f_a, model.topology, renderer.lookup)
    image = renderer.render(truth, light, shape, albedo).image.rgb
    start = truth.model_copy(
        update={
            "f": truth.f * 1.05,
            "pitch": truth.pitch + 0.1,
            "yaw": truth.yaw - 0.1,
            "roll": truth.roll + 0.1,
            "tx": truth.tx + 4.0,
            "ty": truth.ty - 4.0,
        }
    )
    return {
        "renderer": renderer,
        "image": image,
        "landmarks": synthetic_landmarks(shape, truth, model.topology),
        "truth": truth,
        "start": start,
        "light": light,
        "f_S": f_s,
        "f_A": f_a,
    }


def _assert_recovered(result, truth):
    np.testing.assert_allclose(result.projection.angles, truth.angles, atol=1e-2)
    assert result.projection.f == pytest.approx(truth.f, rel=1e-2)
    assert result.breakdown["recon_image"] < 1e-3
    assert result.iterations <= 2000
    assert result.is_monotone


class TestSyntheticRecovery:
    """Test recovery of a perturbed camera on a synthetic face."""

    def test_camera_with_default_settings(self, model, recovery_scene):
        """Test that the default schedule recovers the camera."""
        scene = recovery_scene
        cfg = FitConfig(fit_lighting=False, fit_shape=False, fit_albedo=False)
        result = fit_image(
            scene["image"],
            OcclusionMask.full(64, 64),
            scene["landmarks"],
            model.shape_model,
            model.albedo_model,
            model.topology,
            cfg,
            init_projection=scene["start"],
            init_light=scene["light"],
            init_f_s=scene["f_S"],
            init_f_a=scene["f_A"],
            renderer=scene["renderer"],
        )
        _assert_recovered(result, scene["truth"])

    @pytest.mark.slow
    def test_every_block_with_default_settings(self, model, recovery_scene):
        """Test that fitting every block keeps the reconstruction exact."""
        scene = recovery_scene
        result = fit_image(
            scene["image"],
            OcclusionMask.full(64, 64),
            scene["landmarks"],
            model.shape_model,
            model.albedo_model,
            model.topology,
            FitConfig(),
            init_projection=scene["start"],
            init_light=scene["light"],
            init_f_s=scene["f_S"],
            init_f_a=scene["f_A"],
            renderer=scene["renderer"],
        )
        _assert_recovered(result, scene["truth"])


class TestRelight:
    """Test relighting."""

    def test_same_light_is_identity(self, frontal_normals, light, rng):
        """Test that swapping a light for itself keeps the texture."""
        texture = UVTextureMap(
            data=rng.uniform(size=frontal_normals.data.shape), mask=frontal_normals.mask
        )
        relit, excluded = relight_texture(texture, frontal_normals, light, light)
        np.testing.assert_allclose(relit.data, texture.data)
        assert excluded == 0

    def test_brighter_ambient_scales_texture(self, frontal_normals, rng):
        """Test that raising an ambient light from 2 to 3 scales texels by 1.5."""
        texture = UVTextureMap(
            data=rng.uniform(size=frontal_normals.data.shape), mask=frontal_normals.mask
        )
        relit, excluded = relight_texture(
            texture,
            frontal_normals,
            SHLighting.ambient(3.0),
            SHLighting.ambient(2.0),
        )
        region = texture.mask & frontal_normals.mask
        np.testing.assert_allclose(
            relit.data[region], 1.5 * texture.data[region], rtol=1e-12
        )
        assert excluded == 0

    def test_same_light_render_is_exact(
        self, renderer, topo, mean_shape, mean_albedo, projection, light
    ):
        """Test that relighting a rendered texture under its own light is exact."""
        state = renderer.render(projection, light, mean_shape, mean_albedo)
        image = relight(
            mean_shape,
            state.texture,
            light,
            projection,
            topo,
            64,
            64,
            original_light=light,
        )
        expected, _ = renderer.render_texture(projection, mean_shape, state.texture)
        np.testing.assert_array_equal(image.rgb, expected.rgb)

    def test_zero_shading_is_excluded(self, frontal_normals, rng):
        """Test that texels without original shading keep their value."""
        texture = UVTextureMap(
            data=rng.uniform(size=frontal_normals.data.shape), mask=frontal_normals.mask
        )
        dark = SHLighting(coeffs=np.zeros((3, 9)))
        relit, excluded = relight_texture(
            texture, frontal_normals, neutral_light(), dark
        )
        np.testing.assert_allclose(relit.data, texture.data)
        assert excluded == 3 * int(frontal_normals.mask.sum())

    def test_albedo_relight_is_a_render(
        self, topo, lookup, mean_shape, mean_albedo, projection, light
    ):
        """Test that relighting an albedo map equals rendering it."""
        image = relight(mean_shape, mean_albedo, light, projection, topo, 32, 32)
        expected = Renderer(topo, 32, 32, lookup=lookup).render(
            projection, light, mean_shape, mean_albedo
        )
        np.testing.assert_allclose(image.rgb, expected.image.rgb)

    def test_texture_needs_original_light(
        self, topo, mean_shape, projection, light, frontal_normals
    ):
        """Test that a shaded texture cannot be relit blindly."""
        texture = UVTextureMap(
            data=np.zeros(frontal_normals.data.shape), mask=frontal_normals.mask
        )
        with pytest.raises(ValueError):
            relight(mean_shape, texture, light, projection, topo, 32, 32)
