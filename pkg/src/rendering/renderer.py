"""
The three render paths.

  oracle_dense  dense equidistant quadrature of a field (default 512 bins)
  coarse_fine   hierarchical sampling: stratified coarse samples, inverse-CDF
                fine samples on the coarse weights, fine field on the union
  terminerf     one sampler pass per ray predicts bin weights, n samples are
                drawn from them and the color field is evaluated once each

Every path reports exact network evaluation counts in RenderStats.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Literal, Protocol, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import Settings, get_settings
from ..errors import UsageError
from ..field.base import RadianceField
from ..field.oracle import DENSE_BINS, dense_samples
from ..field.scene import AnalyticScene
from ..geometry.bins import BinMode, boundary_z, segment_fractions
from ..geometry.camera import Camera
from ..geometry.rays import Ray, RayParam, SceneBounds, parameterize_segments
from ..metrics import RAYS_RENDERED, RENDER_DURATION
from ..supervision.labels import LabelConfig, make_labels_batch
from .image_io import ImageBuffer
from .sampling import (
    STREAM_BINS,
    STREAM_COARSE,
    STREAM_FINE,
    STREAM_JITTER,
    RayStreams,
    StepStreams,
    normalize_rows,
    sample_from_bins_batch,
    stratified_z,
)
from .volume import composite_rays, deltas_from_z, transmittance_weights_batch

logger = structlog.get_logger("rendering.renderer")

RenderPath = Literal["oracle_dense", "coarse_fine", "terminerf"]
Streams = Union[RayStreams, StepStreams]


class RenderConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    path: RenderPath = Field("terminerf", description="Render path.")
    n_samples: int = Field(32, ge=1, description="Color samples per ray on the terminerf path.")
    n_uniform: int = Field(0, ge=0, description="Extra equidistant samples mixed into the terminerf path.")
    n_coarse: int = Field(64, ge=1, description="Coarse samples per ray on the coarse_fine path.")
    n_fine: int = Field(128, ge=1, description="Fine samples per ray on the coarse_fine path.")
    n_dense: int = Field(DENSE_BINS, ge=1, description="Quadrature bins on the oracle_dense path.")
    stochastic: bool = Field(False, description="Jittered draws instead of stratified midpoints/quantiles.")
    seed: int = Field(0, description="Seed of the per-ray random streams.")
    background: Tuple[float, float, float] = Field((1.0, 1.0, 1.0), description="Background color.")

    @model_validator(mode="after")
    def _background_range(self) -> "RenderConfig":
        if any(not 0.0 <= c <= 1.0 for c in self.background):
            raise ValueError("background channels must lie in [0, 1]")
        return self

    def passes_per_ray(self) -> int:
        """Network evaluations per traced ray implied by the sample counts."""
        if self.path == "oracle_dense":
            return self.n_dense
        if self.path == "coarse_fine":
            return self.n_coarse + (self.n_coarse + self.n_fine)
        return 1 + self.n_samples + self.n_uniform


@dataclass
class RenderStats:
    rays: int = 0
    rays_skipped: int = 0
    color_passes: int = 0
    coarse_passes: int = 0
    sampler_passes: int = 0
    wall_ms: float = 0.0

    @property
    def total_passes(self) -> int:
        return self.color_passes + self.coarse_passes + self.sampler_passes

    @property
    def traced_rays(self) -> int:
        return self.rays - self.rays_skipped

    def passes_per_ray(self) -> float:
        """Mean passes over rays that reached the networks."""
        return self.total_passes / self.traced_rays if self.traced_rays else 0.0

    def __add__(self, other: "RenderStats") -> "RenderStats":
        return RenderStats(
            rays=self.rays + other.rays,
            rays_skipped=self.rays_skipped + other.rays_skipped,
            color_passes=self.color_passes + other.color_passes,
            coarse_passes=self.coarse_passes + other.coarse_passes,
            sampler_passes=self.sampler_passes + other.sampler_passes,
            wall_ms=self.wall_ms + other.wall_ms,
        )


class BinSampler(Protocol):
    """Predicts per-ray bin weights from the ray's two-point segment."""

    fractions: np.ndarray
    bounds: SceneBounds

    def segments(self, origins: np.ndarray, dirs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        ...

    def predict(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        ...


@dataclass
class RenderModels:
    """
    What a render path queries.

    field is the analytic scene or the (fine) color network; coarse is the
    coarse network of the coarse_fine path (the field itself when None).
    """

    field: RadianceField
    coarse: RadianceField | None = None
    sampler: BinSampler | None = None

    @property
    def bounds(self) -> SceneBounds:
        return self.field.bounds


@dataclass
class Trace:
    """Per-ray results of one path over a ray batch."""

    colors: np.ndarray  # (R, 3)
    z: np.ndarray  # (R_hit, S)
    weights: np.ndarray  # (R_hit, S)
    hit: np.ndarray  # (R,) rays that reached the networks
    stats: RenderStats = field(default_factory=RenderStats)


# --------------------------------------------------------------------------- #
# Oracle sampler
# --------------------------------------------------------------------------- #

class OracleSampler:
    """
    Sampler whose bin weights are the label pipeline applied to dense
    oracle weights along each segment: the best a sampling network trained
    on this scene could predict.
    """

    network_label = "oracle_sampler"

    def __init__(
        self,
        scene: AnalyticScene,
        *,
        n_bins: int = 31,
        mode: BinMode = "centered_log",
        form: RayParam = "segment",
        label_cfg: LabelConfig | None = None,
        n_dense: int = DENSE_BINS,
    ):
        self.scene = scene
        self.bounds = scene.bounds
        self.n_bins = n_bins
        self.mode = mode
        self.form = form
        self.fractions = segment_fractions(mode, n_bins)
        self.n_dense = n_dense
        self.label_cfg = label_cfg or LabelConfig(segment_length=scene.bounds.segment_length)
        self.forward_passes = 0

    def segments(self, origins: np.ndarray, dirs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return parameterize_segments(origins, dirs, self.bounds, self.form)

    def predict(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
        b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
        self.forward_passes += a.shape[0]
        length = np.linalg.norm(b - a, axis=-1)
        dirs = (b - a) / length[:, None]

        # Measure z from a: the scene has no density outside [a, b] for
        # either parameterization, so the segment bounds the quadrature.
        z = np.linspace(0.0, 1.0, self.n_dense + 1)[None, :] * length[:, None]
        left = z[:, :-1]
        points = a[:, None, :] + left[..., None] * dirs[:, None, :]
        _, sigma = self.scene.query(points.reshape(-1, 3), np.repeat(dirs, self.n_dense, axis=0))
        sigma = sigma.reshape(left.shape)
        weights = transmittance_weights_batch(sigma, np.diff(z, axis=-1))

        boundaries = self.fractions[None, :] * length[:, None]
        return make_labels_batch(left, weights, boundaries, length, self.label_cfg)


# --------------------------------------------------------------------------- #
# Sample placement shared with training
# --------------------------------------------------------------------------- #

def fine_z(
    coarse_z: np.ndarray,
    coarse_w: np.ndarray,
    far: float,
    n_fine: int,
    streams: Streams,
) -> np.ndarray:
    """Union of coarse samples and n_fine inverse-CDF draws on the coarse weights, sorted."""
    edges = np.concatenate([coarse_z, np.full((coarse_z.shape[0], 1), far)], axis=-1)
    z_f = sample_from_bins_batch(
        edges,
        normalize_rows(coarse_w),
        n_fine,
        u_select=streams.draw(n_fine, STREAM_FINE),
        u_jitter=streams.draw(n_fine, STREAM_JITTER),
    )
    return np.sort(np.concatenate([coarse_z, z_f], axis=-1), axis=-1)


def terminerf_z(
    bin_weights: np.ndarray,
    boundaries: np.ndarray,
    near: float,
    far: float,
    n_samples: int,
    streams: Streams,
    n_uniform: int = 0,
) -> np.ndarray:
    """
    n_samples draws from each ray's bin distribution (open bin closed at
    far), plus n_uniform stratified samples over [near, far] when requested.
    """
    last = np.maximum(far, boundaries[:, -1:])
    edges = np.concatenate([boundaries, last], axis=-1)
    z = sample_from_bins_batch(
        edges,
        normalize_rows(bin_weights),
        n_samples,
        u_select=streams.draw(n_samples, STREAM_BINS),
        u_jitter=streams.draw(n_samples, STREAM_JITTER),
    )
    if n_uniform:
        n_rays = boundaries.shape[0]
        z_u = stratified_z(np.full(n_rays, near), np.full(n_rays, far), n_uniform, streams.draw(n_uniform, STREAM_COARSE))
        z = np.sort(np.concatenate([z, z_u], axis=-1), axis=-1)
    return z


def _query_along(field: RadianceField, origins: np.ndarray, dirs: np.ndarray, z: np.ndarray):
    points = origins[:, None, :] + z[..., None] * dirs[:, None, :]
    view = np.broadcast_to(dirs[:, None, :], points.shape)
    rgb, sigma = field.query(points.reshape(-1, 3), view.reshape(-1, 3))
    return rgb.reshape(*z.shape, 3), sigma.reshape(z.shape)


# --------------------------------------------------------------------------- #
# Paths
# --------------------------------------------------------------------------- #

def trace_oracle(models: RenderModels, origins: np.ndarray, dirs: np.ndarray, cfg: RenderConfig) -> Trace:
    bounds = models.bounds
    z, rgb, sigma, deltas = dense_samples(models.field, origins, dirs, bounds, cfg.n_dense)
    colors, weights, _ = composite_rays(rgb, sigma, deltas, np.asarray(cfg.background))
    n = origins.shape[0]
    stats = RenderStats(rays=n, color_passes=n * cfg.n_dense)
    return Trace(colors=colors, z=z, weights=weights, hit=np.ones(n, dtype=bool), stats=stats)


def trace_coarse_fine(
    models: RenderModels,
    origins: np.ndarray,
    dirs: np.ndarray,
    cfg: RenderConfig,
    streams: Streams,
) -> Trace:
    bounds = models.bounds
    coarse = models.coarse or models.field
    n = origins.shape[0]
    background = np.asarray(cfg.background)

    z_c = stratified_z(np.full(n, bounds.near), np.full(n, bounds.far), cfg.n_coarse, streams.draw(cfg.n_coarse, STREAM_COARSE))
    rgb_c, sigma_c = _query_along(coarse, origins, dirs, z_c)
    _, w_c, _ = composite_rays(rgb_c, sigma_c, deltas_from_z(z_c, bounds.far), background)

    z = fine_z(z_c, w_c, bounds.far, cfg.n_fine, streams)
    rgb, sigma = _query_along(models.field, origins, dirs, z)
    colors, weights, _ = composite_rays(rgb, sigma, deltas_from_z(z, bounds.far), background)

    stats = RenderStats(
        rays=n,
        coarse_passes=n * cfg.n_coarse,
        color_passes=n * (cfg.n_coarse + cfg.n_fine),
    )
    return Trace(colors=colors, z=z, weights=weights, hit=np.ones(n, dtype=bool), stats=stats)


def trace_terminerf(
    models: RenderModels,
    origins: np.ndarray,
    dirs: np.ndarray,
    cfg: RenderConfig,
    streams: Streams,
) -> Trace:
    sampler = models.sampler
    if sampler is None:
        raise UsageError("the terminerf path needs a sampler")
    bounds = models.bounds
    n = origins.shape[0]
    colors = np.broadcast_to(np.asarray(cfg.background, dtype=np.float64), (n, 3)).copy()

    a, b, hit = sampler.segments(origins, dirs)
    n_hit = int(hit.sum())
    n_per_ray = cfg.n_samples + cfg.n_uniform
    if n_hit == 0:
        stats = RenderStats(rays=n, rays_skipped=n)
        return Trace(colors=colors, z=np.zeros((0, n_per_ray)), weights=np.zeros((0, n_per_ray)), hit=hit, stats=stats)

    o_h, d_h = origins[hit], dirs[hit]
    bin_weights = sampler.predict(a[hit], b[hit])
    boundaries = boundary_z(a[hit], b[hit], o_h, d_h, sampler.fractions)
    z = terminerf_z(bin_weights, boundaries, bounds.near, bounds.far, cfg.n_samples, _subset(streams, hit), cfg.n_uniform)

    rgb, sigma = _query_along(models.field, o_h, d_h, z)
    hit_colors, weights, _ = composite_rays(rgb, sigma, deltas_from_z(z, bounds.far), np.asarray(cfg.background))
    colors[hit] = hit_colors

    stats = RenderStats(
        rays=n,
        rays_skipped=n - n_hit,
        sampler_passes=n_hit,
        color_passes=n_hit * n_per_ray,
    )
    return Trace(colors=colors, z=z, weights=weights, hit=hit, stats=stats)


def _subset(streams: Streams, mask: np.ndarray) -> Streams:
    if isinstance(streams, RayStreams):
        return RayStreams(streams.seed, streams.ray_ids[mask], streams.stochastic)
    return StepStreams(streams.rng, int(mask.sum()))


def trace_rays(
    models: RenderModels,
    origins: np.ndarray,
    dirs: np.ndarray,
    cfg: RenderConfig,
    streams: Streams,
) -> Trace:
    if cfg.path == "oracle_dense":
        return trace_oracle(models, origins, dirs, cfg)
    if cfg.path == "coarse_fine":
        return trace_coarse_fine(models, origins, dirs, cfg, streams)
    return trace_terminerf(models, origins, dirs, cfg, streams)


# --------------------------------------------------------------------------- #
# Public entry points
# --------------------------------------------------------------------------- #

def render_rays(
    models: RenderModels,
    origins: np.ndarray,
    dirs: np.ndarray,
    cfg: RenderConfig,
    ray_ids: Sequence[int] | None = None,
    *,
    settings: Settings | None = None,
) -> Tuple[np.ndarray, RenderStats]:
    """
    Render a ray batch in chunks, on a thread pool when render_workers > 1.

    Random draws are keyed by ray id, so results do not depend on chunking
    or scheduling.
    """
    settings = settings or get_settings()
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    ids = np.arange(origins.shape[0]) if ray_ids is None else np.asarray(ray_ids, dtype=np.int64)

    step = settings.render_chunk_rays
    chunks = [slice(s, s + step) for s in range(0, origins.shape[0], step)]

    def work(sl: slice) -> Trace:
        streams = RayStreams(cfg.seed, ids[sl], cfg.stochastic)
        return trace_rays(models, origins[sl], dirs[sl], cfg, streams)

    if settings.render_workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=settings.render_workers) as pool:
            traces: List[Trace] = list(pool.map(work, chunks))
    else:
        traces = [work(sl) for sl in chunks]

    stats = RenderStats()
    for trace in traces:
        stats = stats + trace.stats
    RAYS_RENDERED.labels(path=cfg.path).inc(origins.shape[0])
    colors = np.concatenate([t.colors for t in traces], axis=0) if traces else np.zeros((0, 3))
    return colors, stats


def render_ray(
    models: RenderModels,
    ray: Ray,
    cfg: RenderConfig,
    ray_id: int = 0,
) -> Tuple[np.ndarray, RenderStats]:
    """Color of one ray plus its evaluation counts."""
    streams = RayStreams(cfg.seed, [ray_id], cfg.stochastic)
    trace = trace_rays(models, ray.origin[None], ray.direction[None], cfg, streams)
    return np.clip(trace.colors[0], 0.0, 1.0), trace.stats


def render_image(
    models: RenderModels,
    camera: Camera,
    cfg: RenderConfig,
    *,
    settings: Settings | None = None,
) -> Tuple[ImageBuffer, RenderStats]:
    """Render every pixel of a camera; pixel index is the ray id."""
    settings = settings or get_settings()
    log = logger.bind(camera=camera.name, path=cfg.path, width=camera.width, height=camera.height)
    log.info("render_image_start")
    start = time.perf_counter()

    origins, dirs = camera.generate_rays()
    colors, stats = render_rays(models, origins, dirs, cfg, settings=settings)
    image = ImageBuffer.from_rays(colors, camera.height, camera.width)

    duration = time.perf_counter() - start
    RENDER_DURATION.labels(path=cfg.path).observe(duration)
    if settings.record_wall_time:
        stats.wall_ms = duration * 1000.0
    log.info(
        "render_image_end",
        duration_ms=int(duration * 1000),
        forward_passes=stats.total_passes,
        rays_skipped=stats.rays_skipped,
    )
    return image, stats


__all__ = [
    "BinSampler",
    "OracleSampler",
    "RenderConfig",
    "RenderModels",
    "RenderPath",
    "RenderStats",
    "Trace",
    "fine_z",
    "render_image",
    "render_ray",
    "render_rays",
    "terminerf_z",
    "trace_coarse_fine",
    "trace_oracle",
    "trace_rays",
    "trace_terminerf",
]
