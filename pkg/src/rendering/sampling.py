from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from ..errors import DegenerateDistribution, InvalidCount, InvalidGrid, MissingRandomSource, ShapeMismatch
from ..geometry.bins import BinGrid

# Per-ray random streams; the tag keeps draws for different purposes apart.
STREAM_COARSE = 0
STREAM_FINE = 1
STREAM_BINS = 2
STREAM_JITTER = 3


def ray_uniforms(seed: int, ray_ids: Iterable[int], n: int, stream: int) -> np.ndarray:
    """
    Uniform [0, 1) draws keyed by (seed, stream, ray id), shape (R, n).

    A ray's draws do not depend on which other rays share its batch, so
    images come out identical under any chunking or thread schedule.
    """
    rows = [np.random.default_rng([seed, stream, int(r)]).random(n) for r in ray_ids]
    if not rows:
        return np.zeros((0, n))
    return np.stack(rows)


class RayStreams:
    """Per-ray uniforms keyed by (seed, stream, ray id); None when deterministic."""

    def __init__(self, seed: int, ray_ids: Sequence[int], stochastic: bool):
        self.seed = seed
        self.ray_ids = np.asarray(ray_ids, dtype=np.int64)
        self.stochastic = stochastic

    def draw(self, n: int, stream: int) -> np.ndarray | None:
        if not self.stochastic:
            return None
        return ray_uniforms(self.seed, self.ray_ids, n, stream)


class StepStreams:
    """Uniforms for one training step, drawn from that step's generator."""

    def __init__(self, rng: np.random.Generator, n_rays: int):
        self.rng = rng
        self.n_rays = n_rays
        self.stochastic = True

    def draw(self, n: int, stream: int) -> np.ndarray:
        return self.rng.random((self.n_rays, n))


def normalize_rows(weights: np.ndarray) -> np.ndarray:
    """Rows scaled to sum 1; all-zero rows become uniform."""
    weights = np.asarray(weights, dtype=np.float64)
    totals = weights.sum(axis=-1, keepdims=True)
    uniform = np.full_like(weights, 1.0 / weights.shape[-1])
    return np.where(totals > 0, weights / np.where(totals > 0, totals, 1.0), uniform)


def stratified_z(
    near: np.ndarray,
    far: np.ndarray,
    n: int,
    jitter: np.ndarray | None = None,
) -> np.ndarray:
    """
    n stratified samples per ray over [near, far]: one per equal-length
    stratum, at the stratum midpoint or jittered uniformly inside it.
    """
    near = np.asarray(near, dtype=np.float64).reshape(-1, 1)
    far = np.asarray(far, dtype=np.float64).reshape(-1, 1)
    offset = 0.5 if jitter is None else jitter
    t = (np.arange(n)[None, :] + offset) / n
    return near + t * (far - near)


def equidistant_left_edges(near: float, far: float, n: int) -> np.ndarray:
    """Left edges of n equal bins on [near, far]."""
    return near + (far - near) * np.arange(n) / n


def sample_from_bins_batch(
    edges: np.ndarray,
    weights: np.ndarray,
    n: int,
    *,
    u_select: np.ndarray | None = None,
    u_jitter: np.ndarray | None = None,
) -> np.ndarray:
    """
    Inverse-CDF sampling of piecewise-constant bin densities, batched.

    edges (R, B + 1), weights (R, B) normalized per row. Without u_select the
    draw is deterministic: quantiles (k + 0.5)/n mapped through the
    piecewise-linear CDF. With u_select/u_jitter (R, n) a bin is picked per
    sorted uniform and the sample lands uniformly inside it. Output (R, n)
    sorted ascending.
    """
    edges = np.asarray(edges, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    n_rays, n_bins = weights.shape
    if edges.shape != (n_rays, n_bins + 1):
        raise ShapeMismatch(f"edges {edges.shape} do not match weights {weights.shape}")
    if n < 1:
        raise InvalidCount(f"need at least one sample, got {n}")
    totals = weights.sum(axis=-1, keepdims=True)
    if np.any(totals <= 0):
        raise DegenerateDistribution("a ray has zero total weight")

    cdf = np.concatenate([np.zeros((n_rays, 1)), np.cumsum(weights, axis=-1)], axis=-1)
    cdf /= cdf[:, -1:]

    stochastic = u_select is not None
    if stochastic:
        u = np.sort(np.asarray(u_select, dtype=np.float64), axis=-1)
    else:
        u = np.broadcast_to((np.arange(n) + 0.5) / n, (n_rays, n))

    # Row-wise searchsorted via per-row offsets (cdf values lie in [0, 1]).
    offsets = 2.0 * np.arange(n_rays)[:, None]
    flat = np.searchsorted((cdf + offsets).ravel(), (u + offsets).ravel(), side="right")
    idx = flat.reshape(n_rays, n) - 1 - (n_bins + 1) * np.arange(n_rays)[:, None]
    idx = np.clip(idx, 0, n_bins - 1)

    lo = np.take_along_axis(edges, idx, axis=-1)
    hi = np.take_along_axis(edges, idx + 1, axis=-1)
    if stochastic:
        jitter = np.full((n_rays, n), 0.5) if u_jitter is None else np.asarray(u_jitter)
        frac = jitter
    else:
        c_lo = np.take_along_axis(cdf, idx, axis=-1)
        c_hi = np.take_along_axis(cdf, idx + 1, axis=-1)
        mass = c_hi - c_lo
        frac = np.divide(u - c_lo, mass, out=np.full_like(u, 0.5), where=mass > 0)
    z = lo + np.clip(frac, 0.0, 1.0) * (hi - lo)
    return np.sort(z, axis=-1)


def sample_from_bins(
    grid: BinGrid,
    norm_weights: Sequence[float],
    n: int,
    stochastic: bool,
    rng: np.random.Generator | None = None,
    *,
    far: float | None = None,
) -> np.ndarray:
    """
    Draw n z-values from one ray's bin distribution.

    The open-ended last bin is truncated at `far`, which open grids require.
    Raises DegenerateDistribution when all weights are zero and
    MissingRandomSource when a stochastic draw has no generator.
    """
    w = np.asarray(norm_weights, dtype=np.float64).reshape(-1)
    if w.size != grid.n_bins:
        raise ShapeMismatch(f"{w.size} weights for {grid.n_bins} bins")
    if grid.open_ended and far is None:
        raise InvalidGrid("open-ended grids need `far` to close the last bin")
    if w.sum() <= 0:
        raise DegenerateDistribution("all bin weights are zero")
    edges = grid.edges(far if far is not None else np.inf)[None, :]

    if stochastic:
        if rng is None:
            raise MissingRandomSource("stochastic sampling needs an rng")
        u_select = rng.random((1, n))
        u_jitter = rng.random((1, n))
        return sample_from_bins_batch(edges, w[None], n, u_select=u_select, u_jitter=u_jitter)[0]
    return sample_from_bins_batch(edges, w[None], n)[0]


__all__ = [
    "RayStreams",
    "STREAM_BINS",
    "STREAM_COARSE",
    "STREAM_FINE",
    "STREAM_JITTER",
    "StepStreams",
    "equidistant_left_edges",
    "normalize_rows",
    "ray_uniforms",
    "sample_from_bins",
    "sample_from_bins_batch",
    "stratified_z",
]
