"""Main CLI interface for uvface."""

import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

import numpy as np
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler

from .core.camera import project, rotation_from_angles
from .core.lighting import uv_normal_map
from .core.mesh_core import uv_lookup, vertex_normals
from .core.rasterizer import Renderer, rasterize
from .errors import UVFaceError
from .fitting.decoders import Decoder
from .fitting.fitter import (
    decode_albedo,
    fit_albedo_lighting,
    fit_image,
    fit_shape,
    initial_projection,
    pseudo_ground_truth,
    relight,
)
from .models.fitting import FitResult, ParamFile
from .models.mesh import UVTextureMap, VertexShape
from .models.morphable import MorphableModel
from .models.render import OcclusionMask
from .utils.config import Config, RunConfig
from .utils.formats import (
    dump_fragments,
    load_landmarks,
    load_model,
    load_obj,
    load_params,
    load_png,
    save_landmarks,
    save_model,
    save_params,
    save_png,
    save_report,
)
from .utils.gradcheck import DEFAULT_TRIALS, all_passed, run_gradcheck
from .utils.output_formatter import OutputFormatter
from .utils.synthetic import (
    build_synthetic_model,
    synthetic_landmarks,
    synthetic_params,
)

# Initialize Typer app
app = typer.Typer(
    name="uvface",
    help="Differentiable UV-space face rendering and morphable-model fitting",
    add_completion=False,
    rich_markup_mode="rich",
)

# stdout carries results, stderr carries logs and errors
console = Console()
error_console = Console(stderr=True)

logger = logging.getLogger("uvface")


class AppState:
    """Settings shared by every command of one invocation."""

    def __init__(self, config_file: Optional[str], seed: Optional[int], raw: bool):
        self.config = Config(config_file)
        self.seed_override = seed
        self.raw = raw
        self.formatter = OutputFormatter(enable_colors=self.config.enable_colors)
        self._run: Optional[RunConfig] = None

    @property
    def run(self) -> RunConfig:
        if self._run is None:
            run = self.config.run_config()
            if self.seed_override is not None:
                run = run.model_copy(update={"seed": self.seed_override})
            self._run = run
        return self._run

    def model(self, path: Optional[Path]) -> MorphableModel:
        """Model from --model, else MODEL_PATH, else the bundled synthetic model."""
        source = path or self.run.model_path
        if source is None:
            logger.debug("using the bundled synthetic model")
            return build_synthetic_model()
        return load_model(source)


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=error_console, show_path=False)],
        force=True,
    )


def _describe(error: Dict[str, Any]) -> str:
    location = ".".join(str(part) for part in error["loc"]) or "value"
    return f"{location}: {error['msg']}"


@contextmanager
def _errors(formatter: OutputFormatter) -> Iterator[None]:
    """Report library and configuration errors on stderr and exit 1."""
    try:
        yield
    except ValidationError as exc:
        problems = "; ".join(_describe(error) for error in exc.errors())
        formatter.display_error(
            f"invalid configuration ({problems})",
            hint="Run 'uvface config' to list the effective settings",
        )
        raise typer.Exit(1)
    except (UVFaceError, ValueError, OSError) as exc:
        formatter.display_error(str(exc))
        raise typer.Exit(1)
    except KeyboardInterrupt:
        formatter.display_error("operation cancelled by user")
        raise typer.Exit(1)


def _state(ctx: typer.Context) -> AppState:
    state: AppState = ctx.obj
    return state


def _decode_shape(model: MorphableModel, f_s: List[float]) -> VertexShape:
    params = np.asarray(f_s, dtype=np.float64)
    if params.size == 0:
        params = np.zeros(model.shape_model.param_dim)
    return VertexShape.from_flat(model.shape_model.decode(params))


def _albedo_params(model: MorphableModel, f_a: List[float]) -> np.ndarray:
    params = np.asarray(f_a, dtype=np.float64)
    return np.zeros(model.albedo_model.param_dim) if params.size == 0 else params


def _load_mask(path: Optional[Path], height: int, width: int) -> OcclusionMask:
    if path is None:
        return OcclusionMask.full(height, width)
    values = load_png(path).mean(axis=-1)
    if values.shape != (height, width):
        raise ValueError(f"mask is {values.shape}, image is {(height, width)}")
    return OcclusionMask(m=values)


@app.callback()
def main(
    ctx: typer.Context,
    config: Optional[str] = typer.Option(
        None, "--config", "-c", help="key=value configuration file"
    ),
    seed: Optional[int] = typer.Option(
        None, "--seed", help="Seed for randomised initialisation and checks"
    ),
    raw: bool = typer.Option(
        False, "--raw", "-r", help="Print plain key: value output without formatting"
    ),
    verbose: bool = typer.Option(
        False, "--verbose", "-v", help="Enable debug logging"
    ),
) -> None:
    """
    Render faces through UV maps and fit morphable models to images.

    Examples:
        uvface synth --out-dir assets
        uvface render --model assets/model.bin --params assets/params.txt --out face.png
        uvface fit --image face.png --landmarks assets/landmarks.txt --out fit.txt
        uvface gradcheck
    """
    _setup_logging(verbose)
    ctx.obj = AppState(config, seed, raw)


@app.command()
def render(
    ctx: typer.Context,
    params: Path = typer.Option(..., "--params", "-p", help="Parameter file"),
    out: Path = typer.Option(..., "--out", "-o", help="Output PNG"),
    model: Optional[Path] = typer.Option(None, "--model", "-m", help="Model file"),
    width: Optional[int] = typer.Option(None, "--width", help="Image width"),
    height: Optional[int] = typer.Option(None, "--height", help="Image height"),
    fragments: Optional[Path] = typer.Option(
        None, "--fragments", help="Also dump the fragment buffer here"
    ),
) -> None:
    """Render a face image from a parameter file."""
    state = _state(ctx)
    with _errors(state.formatter):
        run = state.run
        face = state.model(model)
        values = load_params(params)
        renderer = Renderer(
            face.topology, width or run.width, height or run.height, run.background
        )
        shape = _decode_shape(face, values.f_S)
        albedo = decode_albedo(
            face.albedo_model,
            _albedo_params(face, values.f_A),
            face.topology,
            renderer.lookup,
        )
        result = renderer.render(values.projection, values.light, shape, albedo)
        save_png(out, result.image.rgb)
        if fragments is not None:
            dump_fragments(fragments, result.fragments)
        logger.info("rendered %d covered pixels", int(result.image.coverage.sum()))
    console.print(f"[green]Wrote[/green] {out}")


@app.command()
def unwrap(
    ctx: typer.Context,
    image: Path = typer.Option(..., "--image", "-i", help="Input PNG"),
    params: Path = typer.Option(..., "--params", "-p", help="Parameter file"),
    out: Path = typer.Option(..., "--out", "-o", help="Output UV texture PNG"),
    model: Optional[Path] = typer.Option(None, "--model", "-m", help="Model file"),
    use_coverage: bool = typer.Option(
        True,
        "--coverage/--no-coverage",
        help="Reject texels whose samples touch pixels the mesh does not cover",
    ),
) -> None:
    """Refer every UV texel back to the image (pseudo ground-truth texture)."""
    state = _state(ctx)
    with _errors(state.formatter):
        face = state.model(model)
        rgb = load_png(image)
        values = load_params(params)
        shape = _decode_shape(face, values.f_S)
        height, width = rgb.shape[:2]
        renderer = Renderer(face.topology, width, height)
        coverage = None
        if use_coverage:
            projected = project(shape, values.projection)
            coverage = rasterize(projected, face.topology, width, height).coverage
        texture, valid = renderer.unwarp(rgb, shape, values.projection, coverage)
        save_png(out, texture.data * valid[..., None])
    console.print(f"[green]Wrote[/green] {out} ({int(valid.sum())} valid texels)")


@app.command()
def fit(
    ctx: typer.Context,
    image: Path = typer.Option(..., "--image", "-i", help="Input PNG"),
    out: Path = typer.Option(..., "--out", "-o", help="Fitted parameter file"),
    model: Optional[Path] = typer.Option(None, "--model", "-m", help="Model file"),
    landmarks: Optional[Path] = typer.Option(
        None, "--landmarks", "-l", help="68-point landmark file"
    ),
    mask: Optional[Path] = typer.Option(
        None, "--mask", help="Occlusion mask PNG (white = face)"
    ),
    init: Optional[Path] = typer.Option(
        None, "--init", help="Starting parameter file"
    ),
    report: Optional[Path] = typer.Option(None, "--report", help="JSON report"),
    render_out: Optional[Path] = typer.Option(
        None, "--render", help="Also write the fitted render"
    ),
    pseudo: Optional[Path] = typer.Option(
        None,
        "--pseudo",
        help="Parameter file of an earlier fit; adds the intermediate UV loss",
    ),
) -> None:
    """Fit m, L, f_S and f_A to a single image."""
    state = _state(ctx)
    with _errors(state.formatter):
        run = state.run
        face = state.model(model)
        rgb = load_png(image)
        height, width = rgb.shape[:2]
        marks = load_landmarks(landmarks) if landmarks else None
        renderer = Renderer(face.topology, width, height, run.background)
        if init is not None:
            start = load_params(init)
            projection, light = start.projection, start.light
            f_s, f_a = start.f_S or None, start.f_A or None
        else:
            mean = _decode_shape(face, [])
            projection = initial_projection(mean, face.topology, width, height, marks)
            light, f_s, f_a = None, None, None
        reference = None
        if pseudo is not None:
            earlier = load_params(pseudo)
            reference = pseudo_ground_truth(
                rgb, _decode_shape(face, earlier.f_S), earlier.projection, renderer
            )
        result = fit_image(
            rgb,
            _load_mask(mask, height, width),
            marks,
            face.shape_model,
            face.albedo_model,
            face.topology,
            run.fit,
            projection,
            init_light=light,
            init_f_s=f_s,
            init_f_a=f_a,
            renderer=renderer,
            metric=run.metric,
            pseudo=reference,
        )
        save_params(out, ParamFile.from_result(result))
        if report is not None:
            save_report(report, result)
        if render_out is not None and result.projection and result.light:
            shape = _decode_shape(face, result.f_S)
            albedo = decode_albedo(
                face.albedo_model,
                np.asarray(result.f_A),
                face.topology,
                renderer.lookup,
            )
            fitted = renderer.render(result.projection, result.light, shape, albedo)
            save_png(render_out, fitted.image.rgb)
    state.formatter.display_fit_result(result, raw_output=state.raw)


@app.command("fit-scan")
def fit_scan(
    ctx: typer.Context,
    mesh: Path = typer.Option(..., "--mesh", help="Registered scan (OBJ)"),
    model: Optional[Path] = typer.Option(None, "--model", "-m", help="Model file"),
    bases: Optional[int] = typer.Option(
        None, "--bases", "-k", help="Keep only the first K shape bases"
    ),
    report: Optional[Path] = typer.Option(None, "--report", help="JSON report"),
) -> None:
    """Fit shape parameters to a scan sharing the model topology; reports NME."""
    state = _state(ctx)
    with _errors(state.formatter):
        face = state.model(model)
        decoder = face.shape_model
        if bases is not None:
            decoder = decoder.truncate(bases)
        target, _, _ = load_obj(mesh)
        result = fit_shape(target, decoder, face.topology, state.run.fit)
        if report is not None:
            save_report(report, result)
    state.formatter.display_fit_result(result, raw_output=state.raw)


def _texture_fit_uv(
    face: MorphableModel,
    decoder: Decoder,
    values: ParamFile,
    texture: Path,
    run: RunConfig,
) -> FitResult:
    lookup = uv_lookup(face.topology)
    data = load_png(texture)
    if data.shape[:2] != lookup.shape:
        raise ValueError(f"texture is {data.shape[:2]}, UV grid is {lookup.shape}")
    target = UVTextureMap(data=data, mask=lookup.mask & (data.sum(axis=-1) > 0))
    shape = _decode_shape(face, values.f_S)
    rotation = rotation_from_angles(*values.projection.angles)
    normals_uv, _ = uv_normal_map(
        vertex_normals(shape, face.topology) @ rotation.T, face.topology, lookup
    )
    return fit_albedo_lighting(
        target, normals_uv, decoder, face.topology, run.fit, lookup=lookup
    )


def _texture_fit_image(
    face: MorphableModel,
    decoder: Decoder,
    values: ParamFile,
    image: Path,
    run: RunConfig,
) -> FitResult:
    """Fit L and f_A through the renderer with pose and shape held fixed."""
    rgb = load_png(image)
    height, width = rgb.shape[:2]
    cfg = run.fit.model_copy(update={"fit_projection": False, "fit_shape": False})
    return fit_image(
        rgb,
        OcclusionMask.full(height, width),
        None,
        face.shape_model,
        decoder,
        face.topology,
        cfg,
        values.projection,
        init_light=values.light,
        init_f_s=values.f_S or None,
        renderer=Renderer(face.topology, width, height, run.background),
    )


@app.command("fit-texture")
def fit_texture(
    ctx: typer.Context,
    texture: Optional[Path] = typer.Option(
        None, "--texture", "-t", help="Target UV texture PNG"
    ),
    image: Optional[Path] = typer.Option(
        None, "--image", "-i", help="Target image PNG when TEXTURE_SPACE=image"
    ),
    params: Path = typer.Option(
        ..., "--params", "-p", help="Parameter file giving the pose and shape"
    ),
    out: Optional[Path] = typer.Option(
        None, "--out", "-o", help="Write the parameters with fitted L and f_A"
    ),
    model: Optional[Path] = typer.Option(None, "--model", "-m", help="Model file"),
    bases: Optional[int] = typer.Option(
        None, "--bases", "-k", help="Keep only the first K albedo bases"
    ),
    report: Optional[Path] = typer.Option(None, "--report", help="JSON report"),
) -> None:
    """
    Fit albedo parameters and lighting to a UV texture.

    Black texels of the target count as missing. With TEXTURE_SPACE=image the
    fit compares renders against --image instead.
    """
    state = _state(ctx)
    with _errors(state.formatter):
        face = state.model(model)
        decoder = face.albedo_model
        if bases is not None:
            decoder = decoder.truncate(bases)
        values = load_params(params)
        run = state.run
        if run.fit.texture_space == "image":
            if image is None:
                raise ValueError("TEXTURE_SPACE=image needs --image")
            result = _texture_fit_image(face, decoder, values, image, run)
        else:
            if texture is None:
                raise ValueError("fit-texture needs --texture")
            result = _texture_fit_uv(face, decoder, values, texture, run)
        if out is not None and result.light is not None:
            save_params(
                out,
                ParamFile(
                    projection=values.projection,
                    light=result.light,
                    f_S=values.f_S,
                    f_A=result.f_A,
                ),
            )
        if report is not None:
            save_report(report, result)
    state.formatter.display_fit_result(result, raw_output=state.raw)


@app.command("relight")
def relight_command(
    ctx: typer.Context,
    image: Path = typer.Option(..., "--image", "-i", help="Target image PNG"),
    params: Path = typer.Option(..., "--params", "-p", help="Target parameter file"),
    source: Path = typer.Option(
        ..., "--source", "-s", help="Parameter file whose lighting is transferred"
    ),
    out: Path = typer.Option(..., "--out", "-o", help="Output PNG"),
    model: Optional[Path] = typer.Option(None, "--model", "-m", help="Model file"),
    albedo: bool = typer.Option(
        False,
        "--albedo",
        help="Shade the fitted albedo instead of the unwarped image texture",
    ),
) -> None:
    """Render the target face under the source face's lighting."""
    state = _state(ctx)
    with _errors(state.formatter):
        face = state.model(model)
        rgb = load_png(image)
        height, width = rgb.shape[:2]
        target = load_params(params)
        source_light = load_params(source).light
        shape = _decode_shape(face, target.f_S)
        renderer = Renderer(face.topology, width, height, state.run.background)
        if albedo:
            texture = decode_albedo(
                face.albedo_model,
                _albedo_params(face, target.f_A),
                face.topology,
                renderer.lookup,
            )
        else:
            coverage = rasterize(
                project(shape, target.projection), face.topology, width, height
            ).coverage
            texture, _ = renderer.unwarp(rgb, shape, target.projection, coverage)
        result = relight(
            shape,
            texture,
            source_light,
            target.projection,
            face.topology,
            width,
            height,
            original_light=target.light,
            background=state.run.background,
        )
        save_png(out, result.rgb)
    console.print(f"[green]Wrote[/green] {out}")


@app.command()
def gradcheck(
    ctx: typer.Context,
    trials: int = typer.Option(
        DEFAULT_TRIALS, "--trials", "-n", min=1, help="Random instances per check"
    ),
    model: Optional[Path] = typer.Option(None, "--model", "-m", help="Model file"),
) -> None:
    """Compare every analytic gradient with central finite differences."""
    state = _state(ctx)
    with _errors(state.formatter):
        rows = run_gradcheck(
            seed=state.run.seed, trials=trials, model=state.model(model)
        )
    state.formatter.display_gradcheck(rows, raw_output=state.raw)
    if not all_passed(rows):
        failed = ", ".join(row.name for row in rows if not row.passed)
        state.formatter.display_error(f"gradient check failed: {failed}")
        raise typer.Exit(1)


@app.command()
def synth(
    ctx: typer.Context,
    out_dir: Optional[Path] = typer.Option(
        None, "--out-dir", "-o", help="Directory for the generated files"
    ),
) -> None:
    """Write the bundled synthetic model with a random face and its render."""
    state = _state(ctx)
    with _errors(state.formatter):
        run = state.run
        out_dir = out_dir or Path(run.output_dir)
        face = build_synthetic_model()
        projection, light, f_s, f_a = synthetic_params(face, seed=run.seed)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_model(out_dir / "model.bin", face)
        save_params(
            out_dir / "params.txt",
            ParamFile(
                projection=projection, light=light, f_S=f_s.tolist(), f_A=f_a.tolist()
            ),
        )
        shape = VertexShape.from_flat(face.shape_model.decode(f_s))
        save_landmarks(
            out_dir / "landmarks.txt",
            synthetic_landmarks(shape, projection, face.topology),
        )
        renderer = Renderer(face.topology, run.width, run.height, run.background)
        albedo = decode_albedo(face.albedo_model, f_a, face.topology, renderer.lookup)
        image = renderer.render(projection, light, shape, albedo).image
        save_png(out_dir / "image.png", image.rgb)
    console.print(f"[green]Wrote synthetic assets to[/green] {out_dir}")


@app.command()
def config(ctx: typer.Context) -> None:
    """Show the effective configuration and any validation errors."""
    state = _state(ctx)
    state.formatter.display_config(state.config.to_dict())
    problems = state.config.validate()
    if problems:
        error_console.print("[red]Configuration errors:[/red]")
        for key, error in problems.items():
            error_console.print(f"  [red]{key}:[/red] {error}")
        raise typer.Exit(1)
    console.print("[green]Configuration is valid[/green]")


@app.command()
def version() -> None:
    """Show version information."""
    from . import __version__

    console.print(f"uvface version {__version__}")


if __name__ == "__main__":
    app()
