"""
`terminerf` command group.

Every command writes under --out, never touches its inputs, and takes all
randomness from --seed (default 0). Errors map to exit codes through the
exception hierarchy: 2 usage, 3 data, 4 numeric divergence.

Output names inside --out:
  scene.txt, cameras.txt         gen-scene / adapt
  images/<frame>.png|.pfm        render-oracle / render
  coarse.ckpt, color.ckpt        train-color / finetune / adapt
  sampler.ckpt                   train-sampler / finetune
  depth.bin                      build-depth
  <command>.csv                  metric logs and tables
  metrics.prom                   Prometheus text exposition
"""

from __future__ import annotations

import functools
import time
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple

import click
import structlog
from pydantic import ValidationError

from ..config import get_settings
from ..errors import DataError, TermiNerfError, UsageError
from ..field.scene import PRESETS, AnalyticScene, load_scene, preset_scene, save_scene
from ..geometry.camera import Camera, orbit_cameras, read_camera_manifest, write_camera_manifest
from ..logging_config import setup_logging
from ..metrics import CLI_COMMANDS, write_textfile
from ..nn.checkpoint import load_checkpoint, save_checkpoint
from ..nn.networks import ColorNetwork, SamplingNetwork
from ..rendering.image_io import ImageBuffer, write_pfm, write_png
from ..rendering.renderer import RenderConfig, RenderModels, render_image
from ..supervision.depth_dataset import read_depth_dataset, stack_records
from ..training.config import dump_config, load_config
from ..training.data import RayDataset
from ..training.trainer import (
    ColorModels,
    adapt_to_edit,
    build_depth_dataset,
    finetune_joint,
    train_color,
    train_sampler,
)
from .evaluation import compare_command, eval_command, eval_table, format_table, load_references, write_csv

logger = structlog.get_logger("cli")

SCENE_FILE = "scene.txt"
CAMERAS_FILE = "cameras.txt"
COARSE_CKPT = "coarse.ckpt"
COLOR_CKPT = "color.ckpt"
SAMPLER_CKPT = "sampler.ckpt"
DEPTH_FILE = "depth.bin"

PATH_ALIASES = {"oracle": "oracle_dense", "oracle_dense": "oracle_dense", "coarse_fine": "coarse_fine", "terminerf": "terminerf"}


# --------------------------------------------------------------------------- #
# Command plumbing
# --------------------------------------------------------------------------- #

def pipeline_command(func: Callable[..., None]) -> Callable[..., None]:
    """
    Bind command/seed into the log context, map toolkit errors to exit
    codes, count the invocation and dump metrics.prom into --out.
    """

    @functools.wraps(func)
    def wrapper(*args, **kwargs) -> None:
        ctx = click.get_current_context()
        command = ctx.info_name or func.__name__
        out = kwargs.get("out")
        structlog.contextvars.bind_contextvars(command=command, seed=kwargs.get("seed", 0))
        log = logger.bind()
        log.info("command_start")
        start = time.perf_counter()
        exit_code = 0
        try:
            func(*args, **kwargs)
        except click.ClickException as exc:
            exit_code = exc.exit_code
            raise
        except TermiNerfError as exc:
            exit_code = exc.exit_code
            log.error("command_failed", error=type(exc).__name__, detail=str(exc))
            click.echo(f"error: {exc}", err=True)
        except ValidationError as exc:
            exit_code = UsageError.exit_code
            log.error("command_failed", error="ValidationError", detail=str(exc))
            click.echo(f"error: invalid configuration\n{exc}", err=True)
        except (OSError, UnicodeDecodeError) as exc:
            exit_code = DataError.exit_code
            log.error("command_failed", error=type(exc).__name__, detail=str(exc))
            click.echo(f"error: {exc}", err=True)
        finally:
            CLI_COMMANDS.labels(command=command, exit_code=str(exit_code)).inc()
            log.info("command_end", exit_code=exit_code, duration_ms=int((time.perf_counter() - start) * 1000))
            if out is not None and get_settings().metrics_textfile and Path(out).is_dir():
                write_textfile(Path(out))
            structlog.contextvars.clear_contextvars()
        if exit_code:
            ctx.exit(exit_code)

    return wrapper


def _out_dir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_networks(paths: Sequence[str]) -> Tuple[ColorModels | None, SamplingNetwork | None]:
    """
    Networks from checkpoint files or directories of *.ckpt files, sorted
    by role (coarse / color / sampler); later paths win.
    """
    found: Dict[str, ColorNetwork | SamplingNetwork] = {}
    for raw in paths:
        path = Path(raw)
        files = sorted(path.glob("*.ckpt")) if path.is_dir() else [path]
        for file in files:
            net, _ = load_checkpoint(file)
            found["sampler" if isinstance(net, SamplingNetwork) else net.label] = net
    color = None
    if "color" in found:
        color = ColorModels(coarse=found.get("coarse", found["color"]), fine=found["color"])
    return color, found.get("sampler")


def _require_color(color: ColorModels | None) -> ColorModels:
    if color is None:
        raise UsageError("--checkpoint must provide a color network (color.ckpt)")
    return color


def _require_sampler(sampler: SamplingNetwork | None) -> SamplingNetwork:
    if sampler is None:
        raise UsageError("--checkpoint must provide a sampling network (sampler.ckpt)")
    return sampler


def _save_images(out: Path, camera: Camera, image: ImageBuffer) -> None:
    write_png(out / "images" / f"{camera.name}.png", image)
    write_pfm(out / "images" / f"{camera.name}.pfm", image)


def _save_color(out: Path, color: ColorModels) -> None:
    save_checkpoint(out / COARSE_CKPT, color.coarse)
    save_checkpoint(out / COLOR_CKPT, color.fine)


def _parse_counts(value: str) -> List[int]:
    try:
        counts = [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}") from None
    if not counts or any(n < 1 for n in counts):
        raise click.BadParameter("sample counts must be positive")
    return counts


# Shared options
_seed = click.option("--seed", type=int, default=0, show_default=True, help="Seed of every random draw.")
_out = click.option("--out", type=click.Path(file_okay=False), required=True, help="Output directory.")
_scene = click.option("--scene", type=click.Path(exists=True, dir_okay=False), required=True, help="Scene description file.")
_cams = click.option("--cameras", type=click.Path(exists=True, dir_okay=False), required=True, help="Camera manifest.")
_config_opt = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="key=value TrainConfig file.")
_dump = click.option("--dump-config", "dump", is_flag=True, help="Print the resolved TrainConfig and exit.")
_ckpt = click.option("--checkpoint", multiple=True, type=click.Path(exists=True), help="Checkpoint file or directory (repeatable).")


@click.group()
def cli() -> None:
    """Sampling-network accelerated volumetric rendering toolkit."""
    setup_logging()


# --------------------------------------------------------------------------- #
# Data generation and rendering
# --------------------------------------------------------------------------- #

@cli.command("gen-scene")
@click.option("--preset", type=click.Choice(sorted(PRESETS)), required=True, help="Built-in analytic scene.")
@click.option("--views", type=click.IntRange(min=1), default=20, show_default=True, help="Orbit cameras.")
@click.option("--resolution", type=click.IntRange(min=1), default=64, show_default=True, help="Image width and height.")
@_out
@_seed
@pipeline_command
def gen_scene(preset: str, views: int, resolution: int, out: str, seed: int) -> None:
    """Write a preset scene file and an orbit camera manifest."""
    out_dir = _out_dir(out)
    scene = preset_scene(preset)
    save_scene(out_dir / SCENE_FILE, scene)
    cameras = orbit_cameras(views, width=resolution, height=resolution, center=scene.bounds.center)
    write_camera_manifest(out_dir / CAMERAS_FILE, cameras)
    click.echo(f"{preset}: {len(scene.primitives)} primitives, {views} cameras -> {out_dir}")


@cli.command("render-oracle")
@_scene
@_cams
@_out
@_seed
@click.option("--dense", type=click.IntRange(min=1), default=512, show_default=True, help="Quadrature bins per ray.")
@pipeline_command
def render_oracle(scene: str, cameras: str, out: str, seed: int, dense: int) -> None:
    """Ground-truth images by dense quadrature of the analytic field."""
    out_dir = _out_dir(out)
    field = load_scene(scene)
    cfg = RenderConfig(path="oracle_dense", n_dense=dense, seed=seed)
    for cam in read_camera_manifest(cameras):
        image, _ = render_image(RenderModels(field=field), cam, cfg)
        _save_images(out_dir, cam, image)


@cli.command("render")
@click.option("--scene", type=click.Path(exists=True, dir_okay=False), help="Scene file (required for the oracle path).")
@_cams
@_ckpt
@click.option("--path", "path_name", type=click.Choice(sorted(PATH_ALIASES)), default="terminerf", show_default=True)
@click.option("--samples", type=click.IntRange(min=1), default=32, show_default=True, help="terminerf color samples per ray.")
@click.option("--stochastic", is_flag=True, help="Jittered sampling keyed by --seed.")
@_out
@_seed
@pipeline_command
def render(
    scene: str | None,
    cameras: str,
    checkpoint: Tuple[str, ...],
    path_name: str,
    samples: int,
    stochastic: bool,
    out: str,
    seed: int,
) -> None:
    """Render cameras through one path and record per-image evaluation counts."""
    path = PATH_ALIASES[path_name]
    if path == "oracle_dense":
        if scene is None:
            raise UsageError("--path oracle needs --scene")
        models = RenderModels(field=load_scene(scene))
    else:
        color, sampler = load_networks(checkpoint)
        color = _require_color(color)
        models = color.render_models(_require_sampler(sampler) if path == "terminerf" else None)
    cfg = RenderConfig(path=path, n_samples=samples, stochastic=stochastic, seed=seed)

    out_dir = _out_dir(out)
    rows = []
    for cam in read_camera_manifest(cameras):
        image, stats = render_image(models, cam, cfg)
        _save_images(out_dir, cam, image)
        rows.append(
            [cam.name, str(stats.rays), str(stats.rays_skipped), str(stats.total_passes), f"{stats.passes_per_ray():.2f}", f"{stats.wall_ms:.1f}"]
        )
    headers = ["camera", "rays", "rays_skipped", "forward_passes", "passes_per_ray", "wall_ms"]
    write_csv(out_dir / "render.csv", headers, rows)
    click.echo(format_table(headers, rows), nl=False)


# --------------------------------------------------------------------------- #
# Training
# --------------------------------------------------------------------------- #

@cli.command("train-color")
@_scene
@_cams
@click.option("--ref", type=click.Path(exists=True, file_okay=False), help="Target images (<frame>.pfm/.png) instead of oracle renders.")
@_config_opt
@_dump
@_out
@_seed
@pipeline_command
def train_color_cmd(
    scene: str,
    cameras: str,
    ref: str | None,
    config_path: str | None,
    dump: bool,
    out: str,
    seed: int,
) -> None:
    """Pre-train the coarse and fine color networks."""
    cfg = load_config(config_path, seed=seed)
    if dump:
        click.echo(dump_config(cfg), nl=False)
        return
    field = load_scene(scene)
    cams = read_camera_manifest(cameras)
    if ref is not None:
        dataset = RayDataset.from_images(cams, load_references(ref, cams), field.bounds)
    else:
        dataset = RayDataset.from_scene(field, cams)

    out_dir = _out_dir(out)
    models = ColorModels.create(field.bounds, cfg.architecture(), seed=cfg.seed)
    result = train_color(dataset, models, cfg, log_path=out_dir / "train_color.csv")
    _save_color(out_dir, models)
    click.echo(f"best val PSNR {result.best_val_psnr:.2f} dB at iteration {result.best_iteration}")


@cli.command("build-depth")
@_scene
@_cams
@click.option("--oracle", is_flag=True, help="Record dense oracle weights instead of network weights.")
@_ckpt
@_config_opt
@_dump
@_out
@_seed
@pipeline_command
def build_depth(
    scene: str,
    cameras: str,
    oracle: bool,
    checkpoint: Tuple[str, ...],
    config_path: str | None,
    dump: bool,
    out: str,
    seed: int,
) -> None:
    """Record (z, w) termination weights for every training ray."""
    if oracle == bool(checkpoint):
        raise click.UsageError("pass exactly one of --oracle or --checkpoint")
    cfg = load_config(config_path, seed=seed)
    if dump:
        click.echo(dump_config(cfg), nl=False)
        return
    field = load_scene(scene)
    source: ColorModels | AnalyticScene = field if oracle else _require_color(load_networks(checkpoint)[0])
    dataset = RayDataset.from_scene(field, read_camera_manifest(cameras))
    count = build_depth_dataset(source, dataset, cfg, _out_dir(out) / DEPTH_FILE)
    click.echo(f"{count} records -> {Path(out) / DEPTH_FILE}")


@cli.command("train-sampler")
@_scene
@click.option("--depth", type=click.Path(exists=True, dir_okay=False), required=True, help="Depth dataset file.")
@click.option("--cameras", type=click.Path(exists=True, dir_okay=False), help="Camera manifest (image neighbourhoods for donerf labels).")
@_config_opt
@_dump
@_out
@_seed
@pipeline_command
def train_sampler_cmd(
    scene: str,
    depth: str,
    cameras: str | None,
    config_path: str | None,
    dump: bool,
    out: str,
    seed: int,
) -> None:
    """Train the sampling network on labels built from a depth dataset."""
    cfg = load_config(config_path, seed=seed)
    if dump:
        click.echo(dump_config(cfg), nl=False)
        return
    bounds = load_scene(scene).bounds
    arrays = stack_records(read_depth_dataset(depth))
    image_shape = None
    if cameras is not None:
        cam = read_camera_manifest(cameras)[0]
        image_shape = (cam.height, cam.width)

    sampler = SamplingNetwork(
        bounds,
        n_bins=cfg.n_bins,
        mode=cfg.bin_mode,
        form=cfg.ray_param,
        arch=cfg.architecture(),
        seed=cfg.seed,
    )
    out_dir = _out_dir(out)
    result = train_sampler(arrays, sampler, cfg, image_shape=image_shape, log_path=out_dir / "train_sampler.csv")
    save_checkpoint(out_dir / SAMPLER_CKPT, sampler)
    click.echo(f"best val label PSNR {result.best_val_psnr:.2f} dB at iteration {result.best_iteration}")


@cli.command("finetune")
@_scene
@_cams
@_ckpt
@_config_opt
@_dump
@_out
@_seed
@pipeline_command
def finetune(
    scene: str,
    cameras: str,
    checkpoint: Tuple[str, ...],
    config_path: str | None,
    dump: bool,
    out: str,
    seed: int,
) -> None:
    """Alternating fine-tuning of the color and sampling networks."""
    cfg = load_config(config_path, seed=seed)
    if dump:
        click.echo(dump_config(cfg), nl=False)
        return
    color, sampler = load_networks(checkpoint)
    color, sampler = _require_color(color), _require_sampler(sampler)
    dataset = RayDataset.from_scene(load_scene(scene), read_camera_manifest(cameras))

    out_dir = _out_dir(out)
    result = finetune_joint(color, sampler, dataset, cfg, log_path=out_dir / "finetune.csv")
    _save_color(out_dir, color)
    save_checkpoint(out_dir / SAMPLER_CKPT, sampler)
    click.echo(
        f"{result.color_updates} color / {result.sampler_updates} sampler updates, "
        f"best val PSNR {result.best_val_psnr:.2f} dB"
    )


def _parse_color(value: str) -> Tuple[float, float, float]:
    try:
        r, g, b = (float(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter(f"expected r,g,b, got {value!r}") from None
    return r, g, b


@cli.command("adapt")
@_scene
@_cams
@_ckpt
@click.option("--edit", type=click.Choice(["recolor", "tint", "identity"]), required=True, help="Geometry-preserving scene edit.")
@click.option("--color", "new_color", default="0.1,0.2,0.9", show_default=True, help="r,g,b used by --edit recolor.")
@_config_opt
@_dump
@_out
@_seed
@pipeline_command
def adapt(
    scene: str,
    cameras: str,
    checkpoint: Tuple[str, ...],
    edit: str,
    new_color: str,
    config_path: str | None,
    dump: bool,
    out: str,
    seed: int,
) -> None:
    """Retrain the color network on an edited scene through the frozen sampler."""
    rgb = _parse_color(new_color)
    cfg = load_config(config_path, seed=seed)
    if dump:
        click.echo(dump_config(cfg), nl=False)
        return
    color, sampler = load_networks(checkpoint)
    color, sampler = _require_color(color), _require_sampler(sampler)

    field = load_scene(scene)
    if edit == "recolor":
        field = field.recolor(rgb)
    elif edit == "tint":
        field = field.with_tint(True)
    out_dir = _out_dir(out)
    save_scene(out_dir / SCENE_FILE, field)

    dataset = RayDataset.from_scene(field, read_camera_manifest(cameras))
    result = adapt_to_edit(color, sampler, dataset, cfg, log_path=out_dir / "adapt.csv")
    _save_color(out_dir, color)
    click.echo(f"adapted in {result.forward_passes} forward passes, best val PSNR {result.best_val_psnr:.2f} dB")


# --------------------------------------------------------------------------- #
# Evaluation
# --------------------------------------------------------------------------- #

@cli.command("eval")
@_cams
@_ckpt
@click.option("--samples", "samples_text", default="16,32", show_default=True, help="Comma-separated terminerf sample counts.")
@click.option("--ref", type=click.Path(exists=True, file_okay=False), help="Reference images (<frame>.pfm/.png).")
@click.option("--scene", type=click.Path(exists=True, dir_okay=False), help="Scene file; references are oracle renders when --ref is absent.")
@click.option("--representation", help="Label for the terminerf rows (defaults to the sampler's form+mode).")
@_out
@_seed
@pipeline_command
def eval_cmd(
    cameras: str,
    checkpoint: Tuple[str, ...],
    samples_text: str,
    ref: str | None,
    scene: str | None,
    representation: str | None,
    out: str,
    seed: int,
) -> None:
    """PSNR, passes per ray and speedup against the coarse_fine 64+128 reference."""
    counts = _parse_counts(samples_text)
    if ref is None and scene is None:
        raise click.UsageError("pass --ref or --scene for reference images")
    color, sampler = load_networks(checkpoint)
    color = _require_color(color)
    cams = read_camera_manifest(cameras)

    if ref is not None:
        references = load_references(ref, cams)
    else:
        field = load_scene(scene)
        oracle_cfg = RenderConfig(path="oracle_dense", seed=seed)
        references = [render_image(RenderModels(field=field), cam, oracle_cfg)[0] for cam in cams]

    rows = eval_command(color, sampler, cams, references, counts, seed=seed, representation=representation)
    headers, cells = eval_table(rows)
    write_csv(_out_dir(out) / "eval.csv", headers, cells)
    click.echo(format_table(headers, cells), nl=False)


@cli.command("compare")
@click.argument("tables", nargs=-1, type=click.Path(dir_okay=False))
@_out
@pipeline_command
def compare(tables: Tuple[str, ...], out: str) -> None:
    """Cross-tabulate terminerf PSNR by representation and sample count."""
    headers, rows = compare_command(list(tables))
    write_csv(_out_dir(out) / "compare.csv", headers, rows)
    click.echo(format_table(headers, rows), nl=False)


def main() -> None:
    cli(prog_name="terminerf")


__all__ = ["cli", "load_networks", "main"]
