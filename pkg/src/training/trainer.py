"""
Training regimes.

  train_color          coarse + fine color networks on the photometric loss
                       through the coarse_fine path
  build_depth_dataset  record (z, w) termination weights per training ray,
                       from the trained color networks or the analytic oracle
  train_sampler        sampler regression onto labels built from the records
  finetune_joint       alternating color / sampler updates, the color
                       network supplying the sampler's labels
  adapt_to_edit        color-only retraining through a frozen sampler

Every step t draws its randomness from default_rng([seed, t]). The forward
passes a step consumes follow from the batch size and sample counts alone
and are summed into the metric log's forward_passes_cum column.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Tuple, Union

import numpy as np
import structlog

from ..config import Settings, get_settings
from ..errors import EmptySource, NumericDivergence
from ..field.oracle import DENSE_BINS, dense_samples
from ..field.scene import AnalyticScene
from ..geometry.bins import boundary_z
from ..geometry.rays import SceneBounds, canonicalize_segments, parameterize_segments
from ..metrics import TRAIN_DIVERGENCE, TRAIN_STEPS
from ..nn.adam import AdamState, adam_step
from ..nn.networks import Architecture, ColorNetwork, SamplingNetwork
from ..rendering.distribution import WeightDistribution
from ..rendering.image_io import psnr_from_mse
from ..rendering.renderer import (
    RenderConfig,
    RenderModels,
    fine_z,
    render_rays,
    terminerf_z,
    trace_coarse_fine,
)
from ..rendering.sampling import STREAM_COARSE, RayStreams, StepStreams, stratified_z
from ..rendering.volume import (
    CompositeCache,
    composite_rays,
    composite_rays_backward,
    deltas_from_z,
    transmittance_weights_batch,
)
from ..supervision.depth_dataset import DepthArrays, DepthRecord, write_depth_dataset
from ..supervision.donerf import depth_from_weights, donerf_labels
from ..supervision.labels import LabelConfig, make_labels_batch
from .config import TrainConfig
from .data import RayBatch, RayDataset
from .metric_log import MetricLog, MetricRow

logger = structlog.get_logger("training.trainer")

Network = Union[ColorNetwork, SamplingNetwork]
StepFn = Callable[[int, np.random.Generator], Tuple[Union[float, None], int]]


@dataclass
class ColorModels:
    """The coarse and fine color networks; the fine one is the color network."""

    coarse: ColorNetwork
    fine: ColorNetwork

    @classmethod
    def create(cls, bounds: SceneBounds, arch: Architecture, seed: int = 0) -> "ColorModels":
        return cls(
            coarse=ColorNetwork(bounds, arch, seed=seed, label="coarse"),
            fine=ColorNetwork(bounds, arch, seed=seed + 1, label="color"),
        )

    def render_models(self, sampler: SamplingNetwork | None = None) -> RenderModels:
        return RenderModels(field=self.fine, coarse=self.coarse, sampler=sampler)


@dataclass
class TrainResult:
    regime: str
    log: MetricLog
    iterations: int
    best_iteration: int
    best_val_psnr: float
    forward_passes: int
    color_updates: int = 0
    sampler_updates: int = 0


# --------------------------------------------------------------------------- #
# Loop plumbing
# --------------------------------------------------------------------------- #

def _check_finite(value: float, regime: str, iteration: int) -> None:
    if not np.isfinite(value):
        TRAIN_DIVERGENCE.labels(regime=regime).inc()
        logger.error("training_diverged", regime=regime, iteration=iteration, loss=float(value))
        raise NumericDivergence(f"{regime}: non-finite loss {value} at iteration {iteration}")


class _BestKeeper:
    """In-memory copy of the parameters that scored best on validation."""

    def __init__(self, regime: str, networks: Dict[str, Network]):
        self.regime = regime
        self.networks = networks
        self.best_score = -math.inf
        self.best_iteration = 0
        self._snapshot: Dict[str, List[np.ndarray]] = {}

    def offer(self, iteration: int, score: float) -> None:
        if not np.isfinite(score) or score <= self.best_score:
            return
        self.best_score = score
        self.best_iteration = iteration
        self._snapshot = {name: [p.copy() for p in net.mlp.parameters()] for name, net in self.networks.items()}
        logger.debug("checkpoint_kept", regime=self.regime, iteration=iteration, val_psnr=score)

    def restore(self) -> None:
        for name, net in self.networks.items():
            for param, saved in zip(net.mlp.parameters(), self._snapshot.get(name, [])):
                param[...] = saved


def _run_loop(
    regime: str,
    iterations: int,
    step: StepFn,
    validate: Callable[[], float],
    keeper: _BestKeeper,
    cfg: TrainConfig,
    log_path: str | Path | None,
    settings: Settings,
) -> TrainResult:
    log = logger.bind(regime=regime)
    log.info("train_start", iterations=iterations, batch_rays=cfg.batch_rays, seed=cfg.seed)
    start = time.perf_counter()
    passes = 0
    window: List[float] = []

    with MetricLog(log_path) as metrics:
        for it in range(1, iterations + 1):
            loss, n_passes = step(it, np.random.default_rng([cfg.seed, it]))
            passes += n_passes
            if loss is not None:
                window.append(loss)

            if it % cfg.val_every == 0 or it == iterations:
                val_psnr = validate()
                wall_ms = (time.perf_counter() - start) * 1000.0 if settings.record_wall_time else 0.0
                mean_loss = float(np.mean(window)) if window else None
                metrics.append(MetricRow(it, wall_ms, mean_loss, val_psnr, passes))
                window.clear()
                log.info("validation", iteration=it, loss=mean_loss, val_psnr=round(val_psnr, 4), forward_passes=passes)
                keeper.offer(it, val_psnr)
        keeper.restore()

    log.info(
        "train_end",
        duration_ms=int((time.perf_counter() - start) * 1000),
        best_iteration=keeper.best_iteration,
        best_val_psnr=round(keeper.best_score, 4),
        forward_passes=passes,
    )
    return TrainResult(
        regime=regime,
        log=metrics,
        iterations=iterations,
        best_iteration=keeper.best_iteration,
        best_val_psnr=keeper.best_score,
        forward_passes=passes,
    )


def _forward_along(net: ColorNetwork, origins: np.ndarray, dirs: np.ndarray, z: np.ndarray):
    points = origins[:, None, :] + z[..., None] * dirs[:, None, :]
    view = np.broadcast_to(dirs[:, None, :], points.shape)
    rgb, sigma, cache = net.forward(points.reshape(-1, 3), view.reshape(-1, 3))
    return rgb.reshape(*z.shape, 3), sigma.reshape(z.shape), cache


def _color_grads(net: ColorNetwork, cache, comp: CompositeCache, d_color: np.ndarray) -> List[np.ndarray]:
    d_rgb, d_sigma = composite_rays_backward(comp, d_color)
    return net.backward(cache, d_rgb, d_sigma)


def _render_psnr(models: RenderModels, data: RayDataset, cfg: RenderConfig, settings: Settings) -> float:
    colors, _ = render_rays(models, data.origins, data.dirs, cfg, data.ray_ids, settings=settings)
    return psnr_from_mse(float(np.mean((colors - data.colors) ** 2)))


# --------------------------------------------------------------------------- #
# Color pre-training
# --------------------------------------------------------------------------- #

def train_color(
    dataset: RayDataset,
    models: ColorModels,
    cfg: TrainConfig,
    *,
    log_path: str | Path | None = None,
    settings: Settings | None = None,
) -> TrainResult:
    """
    Photometric MSE through the coarse_fine path. Both networks are trained;
    fine samples are drawn from the coarse weights without gradient.
    """
    settings = settings or get_settings()
    bounds = dataset.bounds
    background = np.asarray(dataset.background)
    train, val = dataset.split_cameras(cfg.val_fraction, cfg.seed)
    val = val.head(cfg.val_rays, cfg.seed)
    adams = {
        net.label: AdamState.for_params(net.mlp.parameters(), **cfg.adam_kwargs(cfg.lr_color_pretrain))
        for net in (models.coarse, models.fine)
    }
    passes_per_ray = cfg.n_coarse + (cfg.n_coarse + cfg.n_fine)

    def step(it: int, rng: np.random.Generator) -> Tuple[float, int]:
        batch = train.sample(rng, cfg.batch_rays)
        n = len(batch)
        streams = StepStreams(rng, n)

        z_c = stratified_z(np.full(n, bounds.near), np.full(n, bounds.far), cfg.n_coarse, streams.draw(cfg.n_coarse, STREAM_COARSE))
        rgb_c, sigma_c, cache_c = _forward_along(models.coarse, batch.origins, batch.dirs, z_c)
        col_c, w_c, comp_c = composite_rays(rgb_c, sigma_c, deltas_from_z(z_c, bounds.far), background)

        z_f = fine_z(z_c, w_c, bounds.far, cfg.n_fine, streams)
        rgb_f, sigma_f, cache_f = _forward_along(models.fine, batch.origins, batch.dirs, z_f)
        col_f, _, comp_f = composite_rays(rgb_f, sigma_f, deltas_from_z(z_f, bounds.far), background)

        err_c = col_c - batch.colors
        err_f = col_f - batch.colors
        loss = float(np.mean(err_f**2))
        _check_finite(loss + float(np.mean(err_c**2)), "color", it)

        scale = 2.0 / err_f.size
        for net, cache, comp, err in ((models.coarse, cache_c, comp_c, err_c), (models.fine, cache_f, comp_f, err_f)):
            adam_step(adams[net.label], net.mlp.parameters(), _color_grads(net, cache, comp, scale * err))
        TRAIN_STEPS.labels(regime="color").inc()
        return loss, n * passes_per_ray

    val_cfg = RenderConfig(
        path="coarse_fine",
        n_coarse=cfg.n_coarse,
        n_fine=cfg.n_fine,
        seed=cfg.seed,
        background=dataset.background,
    )
    keeper = _BestKeeper("color", {"coarse": models.coarse, "color": models.fine})
    return _run_loop(
        "color",
        cfg.color_iters,
        step,
        lambda: _render_psnr(models.render_models(), val, val_cfg, settings),
        keeper,
        cfg,
        log_path,
        settings,
    )


# --------------------------------------------------------------------------- #
# Depth dataset
# --------------------------------------------------------------------------- #

def build_depth_dataset(
    source: ColorModels | AnalyticScene,
    dataset: RayDataset,
    cfg: TrainConfig,
    path: str | Path,
    *,
    settings: Settings | None = None,
) -> int:
    """
    Write one record per ray of the dataset.

    From color networks the record is the deterministic coarse_fine sample
    set (n_coarse + n_fine tuples, fine-network weights); from a scene it is
    the dense oracle quadrature (512 tuples). A ray that misses the scene
    sphere keeps its sample positions with all-zero weights and carries the
    constant-length segment as (a, b). Returns the record count.
    """
    settings = settings or get_settings()
    bounds = dataset.bounds
    kind = "oracle" if isinstance(source, AnalyticScene) else "coarse_fine"
    log = logger.bind(source=kind, rays=len(dataset))
    log.info("depth_dataset_build_start")
    start = time.perf_counter()

    a, b, hit = parameterize_segments(dataset.origins, dataset.dirs, bounds, cfg.ray_param)
    if not np.all(hit):
        seg_a, seg_b, _ = canonicalize_segments(dataset.origins, dataset.dirs, bounds)
        a = np.where(hit[:, None], a, seg_a)
        b = np.where(hit[:, None], b, seg_b)
    trace_cfg = RenderConfig(path="coarse_fine", n_coarse=cfg.n_coarse, n_fine=cfg.n_fine, seed=cfg.seed)
    records: List[DepthRecord] = []
    for s in range(0, len(dataset), settings.render_chunk_rays):
        sel = np.arange(s, min(s + settings.render_chunk_rays, len(dataset)))
        origins, dirs = dataset.origins[sel], dataset.dirs[sel]
        if isinstance(source, AnalyticScene):
            z, _, sigma, deltas = dense_samples(source, origins, dirs, bounds, DENSE_BINS)
            w = transmittance_weights_batch(sigma, deltas)
        else:
            streams = RayStreams(cfg.seed, dataset.ray_ids[sel], stochastic=False)
            trace = trace_coarse_fine(source.render_models(), origins, dirs, trace_cfg, streams)
            z, w = trace.z, trace.weights
        w = np.where(hit[sel][:, None], w, 0.0)
        for k, r in enumerate(sel):
            records.append(DepthRecord(int(dataset.ray_ids[r]), origins[k], dirs[k], a[r], b[r], z[k], w[k]))

    count = write_depth_dataset(path, records)
    log.info(
        "depth_dataset_build_end",
        records=count,
        misses=int(np.count_nonzero(~hit)),
        duration_ms=int((time.perf_counter() - start) * 1000),
    )
    return count


# --------------------------------------------------------------------------- #
# Sampler training
# --------------------------------------------------------------------------- #

def sampler_labels(
    arrays: DepthArrays,
    sampler: SamplingNetwork,
    cfg: TrainConfig,
    *,
    image_shape: Tuple[int, int] | None = None,
) -> np.ndarray:
    """
    Label rows (R, n_bins) for recorded rays on the sampler's bin grids.

    With supervision="donerf" each ray's single depth is classified and
    spread to its image neighbours; without image_shape the rays are
    treated as isolated pixels.
    """
    bounds = sampler.bounds
    boundaries = boundary_z(arrays.a, arrays.b, arrays.origins, arrays.dirs, sampler.fractions)
    if cfg.supervision == "weights":
        return make_labels_batch(arrays.z, arrays.w, boundaries, bounds.far, cfg.label_config(bounds.segment_length))

    depths = np.array(
        [depth_from_weights(WeightDistribution(z=z, w=w), bounds.far) for z, w in zip(arrays.z, arrays.w)]
    )
    if image_shape is None:
        return donerf_labels(depths[:, None], boundaries[:, None, :], bounds.near, bounds.far, 1, cfg.donerf_z)[:, 0]

    height, width = image_shape
    cams = arrays.ray_ids // (height * width)
    pixels = arrays.ray_ids % (height * width)
    labels = np.empty_like(boundaries)
    for cam in np.unique(cams):
        rows = np.flatnonzero(cams == cam)
        mask = np.zeros(height * width, dtype=bool)
        mask[pixels[rows]] = True
        depth_img = np.full(height * width, bounds.far)
        depth_img[pixels[rows]] = depths[rows]
        bound_img = np.broadcast_to(boundaries[rows[0]], (height * width, sampler.n_bins)).copy()
        bound_img[pixels[rows]] = boundaries[rows]
        image = donerf_labels(
            depth_img.reshape(height, width),
            bound_img.reshape(height, width, -1),
            bounds.near,
            bounds.far,
            cfg.donerf_kernel,
            cfg.donerf_z,
            mask=mask.reshape(height, width),
        )
        labels[rows] = image.reshape(height * width, -1)[pixels[rows]]
    return labels


def train_sampler(
    arrays: DepthArrays,
    sampler: SamplingNetwork,
    cfg: TrainConfig,
    *,
    image_shape: Tuple[int, int] | None = None,
    log_path: str | Path | None = None,
    settings: Settings | None = None,
) -> TrainResult:
    """
    MSE regression of the normalized sampler outputs onto label rows.

    A seeded share (val_fraction) of the records is held out; the logged
    val_psnr is the label MSE expressed in dB. Records of rays that miss
    the scene sphere are left out.
    """
    settings = settings or get_settings()
    hits = np.flatnonzero(sampler.segments(arrays.origins, arrays.dirs)[2])
    if hits.size == 0:
        raise EmptySource("no depth record hits the scene sphere")
    if hits.size < len(arrays):
        logger.info("sampler_records_filtered", kept=int(hits.size), misses=len(arrays) - int(hits.size))
        arrays = arrays.take(hits)
    labels = sampler_labels(arrays, sampler, cfg, image_shape=image_shape)
    n = len(arrays)
    perm = np.random.default_rng(cfg.seed).permutation(n)
    n_val = min(int(round(cfg.val_fraction * n)), n - 1)
    train_idx = np.sort(perm[n_val:])
    val_idx = np.sort(perm[:n_val])[: cfg.val_rays] if n_val > 0 else train_idx[: cfg.val_rays]

    if cfg.sampler_epochs > 0:
        iterations = cfg.sampler_epochs * math.ceil(train_idx.size / cfg.batch_rays)
    else:
        iterations = cfg.sampler_iters
    adam = AdamState.for_params(sampler.mlp.parameters(), **cfg.adam_kwargs(cfg.lr_sampler))

    def step(it: int, rng: np.random.Generator) -> Tuple[float, int]:
        sel = train_idx[rng.choice(train_idx.size, size=cfg.batch_rays, replace=train_idx.size < cfg.batch_rays)]
        pred, cache = sampler.forward(arrays.a[sel], arrays.b[sel])
        err = pred - labels[sel]
        loss = float(np.mean(err**2))
        _check_finite(loss, "sampler", it)
        adam_step(adam, sampler.mlp.parameters(), sampler.backward(cache, 2.0 * err / err.size))
        TRAIN_STEPS.labels(regime="sampler").inc()
        return loss, sel.size

    def validate() -> float:
        pred = sampler.predict(arrays.a[val_idx], arrays.b[val_idx])
        return psnr_from_mse(float(np.mean((pred - labels[val_idx]) ** 2)))

    keeper = _BestKeeper("sampler", {"sampler": sampler})
    return _run_loop("sampler", iterations, step, validate, keeper, cfg, log_path, settings)


# --------------------------------------------------------------------------- #
# Sampling through the sampler
# --------------------------------------------------------------------------- #

def _mixed_z(
    sampler: SamplingNetwork,
    batch: RayBatch,
    n_pred: int,
    n_uniform: int,
    streams: StepStreams,
    pred: np.ndarray | None = None,
) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Sample positions: n_pred draws from the sampler's bins plus n_uniform
    stratified samples over [near, far]. Returns (z, boundaries, sampler passes).
    """
    bounds = sampler.bounds
    n = len(batch)
    boundaries = boundary_z(batch.a, batch.b, batch.origins, batch.dirs, sampler.fractions)
    if n_pred == 0:
        z = stratified_z(np.full(n, bounds.near), np.full(n, bounds.far), n_uniform, streams.draw(n_uniform, STREAM_COARSE))
        return z, boundaries, 0
    sampler_passes = 0
    if pred is None:
        pred = sampler.predict(batch.a, batch.b)
        sampler_passes = n
    z = terminerf_z(pred, boundaries, bounds.near, bounds.far, n_pred, streams, n_uniform)
    return z, boundaries, sampler_passes


def _color_step_through_sampler(
    net: ColorNetwork,
    sampler: SamplingNetwork,
    batch: RayBatch,
    n_pred: int,
    n_uniform: int,
    rng: np.random.Generator,
    adam: AdamState,
    background: np.ndarray,
    regime: str,
    it: int,
) -> Tuple[float, int]:
    far = net.bounds.far
    streams = StepStreams(rng, len(batch))
    z, _, sampler_passes = _mixed_z(sampler, batch, n_pred, n_uniform, streams)
    rgb, sigma, cache = _forward_along(net, batch.origins, batch.dirs, z)
    colors, _, comp = composite_rays(rgb, sigma, deltas_from_z(z, far), background)

    err = colors - batch.colors
    loss = float(np.mean(err**2))
    _check_finite(loss, regime, it)
    adam_step(adam, net.mlp.parameters(), _color_grads(net, cache, comp, 2.0 * err / err.size))
    TRAIN_STEPS.labels(regime=regime).inc()
    return loss, sampler_passes + z.size


def _sampler_step_from_color(
    net: ColorNetwork,
    sampler: SamplingNetwork,
    batch: RayBatch,
    cfg: TrainConfig,
    label_cfg: LabelConfig,
    rng: np.random.Generator,
    adam: AdamState,
    background: np.ndarray,
    it: int,
) -> Tuple[float, int]:
    """Labels from the color network's weights on the mixed sample set."""
    far = sampler.bounds.far
    streams = StepStreams(rng, len(batch))
    pred, cache = sampler.forward(batch.a, batch.b)
    z, boundaries, _ = _mixed_z(sampler, batch, cfg.n_pred, cfg.n_uniform, streams, pred=pred)
    rgb, sigma = net.query(
        (batch.origins[:, None, :] + z[..., None] * batch.dirs[:, None, :]).reshape(-1, 3),
        np.repeat(batch.dirs, z.shape[1], axis=0),
    )
    _, weights, _ = composite_rays(rgb.reshape(*z.shape, 3), sigma.reshape(z.shape), deltas_from_z(z, far), background)
    labels = make_labels_batch(z, weights, boundaries, far, label_cfg)

    err = pred - labels
    loss = float(np.mean(err**2))
    _check_finite(loss, "joint_sampler", it)
    adam_step(adam, sampler.mlp.parameters(), sampler.backward(cache, 2.0 * err / err.size))
    TRAIN_STEPS.labels(regime="joint_sampler").inc()
    return loss, len(batch) + z.size


# --------------------------------------------------------------------------- #
# Joint fine-tuning and edit adaptation
# --------------------------------------------------------------------------- #

def finetune_joint(
    color: ColorModels,
    sampler: SamplingNetwork,
    dataset: RayDataset,
    cfg: TrainConfig,
    *,
    log_path: str | Path | None = None,
    settings: Settings | None = None,
) -> TrainResult:
    """
    Alternate color and sampler updates: out of every joint_ratio + 1
    iterations the last one updates the sampler (1:1 by default, color
    first). freeze_sampler turns every iteration into a color step.

    Color steps use n_pred samples from the sampler plus n_uniform
    equidistant ones; sampler steps label the same mix with the color
    network's weights. The logged loss is the photometric loss only.
    """
    settings = settings or get_settings()
    bounds = dataset.bounds
    background = np.asarray(dataset.background)
    data = dataset.with_segments(sampler.form)
    train, val = data.split_cameras(cfg.val_fraction, cfg.seed)
    val = val.head(cfg.val_rays, cfg.seed)
    label_cfg = cfg.label_config(bounds.segment_length)
    color_adam = AdamState.for_params(color.fine.mlp.parameters(), **cfg.adam_kwargs(cfg.lr_color))
    sampler_adam = AdamState.for_params(sampler.mlp.parameters(), **cfg.adam_kwargs(cfg.lr_sampler))
    updates = {"color": 0, "sampler": 0}
    period = cfg.joint_ratio + 1

    def step(it: int, rng: np.random.Generator) -> Tuple[float | None, int]:
        batch = train.sample(rng, cfg.batch_rays)
        if not cfg.freeze_sampler and (it - 1) % period == cfg.joint_ratio:
            _, passes = _sampler_step_from_color(color.fine, sampler, batch, cfg, label_cfg, rng, sampler_adam, background, it)
            updates["sampler"] += 1
            return None, passes
        loss, passes = _color_step_through_sampler(
            color.fine, sampler, batch, cfg.n_pred, cfg.n_uniform, rng, color_adam, background, "joint_color", it
        )
        updates["color"] += 1
        return loss, passes

    val_cfg = RenderConfig(
        path="terminerf",
        n_samples=max(cfg.n_pred, 1),
        n_uniform=cfg.n_uniform,
        seed=cfg.seed,
        background=dataset.background,
    )
    keeper = _BestKeeper("joint", {"color": color.fine, "sampler": sampler})
    result = _run_loop(
        "joint",
        cfg.joint_iters,
        step,
        lambda: _render_psnr(color.render_models(sampler), val, val_cfg, settings),
        keeper,
        cfg,
        log_path,
        settings,
    )
    result.color_updates = updates["color"]
    result.sampler_updates = updates["sampler"]
    return result


def adapt_to_edit(
    color: ColorModels,
    sampler: SamplingNetwork,
    dataset: RayDataset,
    cfg: TrainConfig,
    *,
    log_path: str | Path | None = None,
    settings: Settings | None = None,
) -> TrainResult:
    """
    Retrain the color network on an edited scene's images, sampling
    adapt_samples points per ray through the frozen sampler.
    """
    settings = settings or get_settings()
    background = np.asarray(dataset.background)
    data = dataset.with_segments(sampler.form)
    train, val = data.split_cameras(cfg.val_fraction, cfg.seed)
    val = val.head(cfg.val_rays, cfg.seed)
    adam = AdamState.for_params(color.fine.mlp.parameters(), **cfg.adam_kwargs(cfg.lr_color_pretrain))

    def step(it: int, rng: np.random.Generator) -> Tuple[float, int]:
        batch = train.sample(rng, cfg.batch_rays)
        return _color_step_through_sampler(
            color.fine, sampler, batch, cfg.adapt_samples, cfg.adapt_uniform, rng, adam, background, "adapt", it
        )

    val_cfg = RenderConfig(
        path="terminerf",
        n_samples=cfg.adapt_samples,
        n_uniform=cfg.adapt_uniform,
        seed=cfg.seed,
        background=dataset.background,
    )
    keeper = _BestKeeper("adapt", {"color": color.fine})
    result = _run_loop(
        "adapt",
        cfg.adapt_iters,
        step,
        lambda: _render_psnr(color.render_models(sampler), val, val_cfg, settings),
        keeper,
        cfg,
        log_path,
        settings,
    )
    result.color_updates = cfg.adapt_iters
    return result


__all__ = [
    "ColorModels",
    "TrainResult",
    "adapt_to_edit",
    "build_depth_dataset",
    "finetune_joint",
    "sampler_labels",
    "train_color",
    "train_sampler",
]
