"""
Sampling-network labels from recorded termination weights.

Pipeline per ray: optional equalization onto evenly spaced samples,
Gaussian blur along the ray, max-resampling onto the ray's bin grid,
normalization.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..errors import EmptySource, InvalidCount
from ..geometry.bins import BinGrid
from ..rendering.distribution import WeightDistribution
from ..rendering.sampling import normalize_rows


class LabelConfig(BaseModel):
    """
    Label pipeline parameters.

    The target bin grid differs per ray, so it is passed to make_labels
    alongside the config rather than stored here.
    """

    model_config = ConfigDict(frozen=True)

    kernel_size: int = Field(9, ge=1, description="Blur kernel size K (odd); 1 disables blurring.")
    sigma_blur: float = Field(3.0, gt=0, description="Gaussian sigma in sample-index units of the kernel.")
    window: float | None = Field(
        None,
        gt=0,
        description="Blur window distance d in scene units; defaults to K / n_source * segment_length.",
    )
    segment_length: float = Field(4.0, gt=0, description="Ray length used for the default window.")
    equalize: bool = Field(True, description="Resample onto evenly spaced samples before blurring.")
    equalize_n: int | None = Field(None, ge=2, description="Evenly spaced sample count; defaults to the source count.")

    @field_validator("kernel_size")
    @classmethod
    def _odd_kernel(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {value}")
        return value


def gaussian_blur_weights(dist: WeightDistribution, cfg: LabelConfig) -> WeightDistribution:
    """
    Replace each w_i by the Gaussian-weighted average of the weights within
    ray distance d/2 of z_i.

    sigma_blur counts kernel taps, so the distance-space sigma is
    sigma_blur * d / K (with evenly spaced input a tap is one sample).
    """
    if cfg.kernel_size == 1 or len(dist) < 2:
        return dist
    n_src = len(dist)
    window = cfg.window if cfg.window is not None else cfg.kernel_size / n_src * cfg.segment_length
    sigma = cfg.sigma_blur * window / cfg.kernel_size

    offsets = dist.z[None, :] - dist.z[:, None]
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel = np.where(np.abs(offsets) <= 0.5 * window * (1.0 + 1e-9), kernel, 0.0)
    blurred = (kernel @ dist.w) / kernel.sum(axis=1)
    return WeightDistribution(z=dist.z, w=blurred)


def equalize_samples(dist: WeightDistribution, n: int) -> WeightDistribution:
    """
    Resample onto n evenly spaced z over [z_first, z_last].

    Each new sample takes the maximum source weight in its cell (half a
    spacing either side, half-open); empty cells interpolate linearly, so
    narrow peaks survive.
    """
    if n < 2:
        raise InvalidCount(f"equalize needs n >= 2, got {n}")
    if len(dist) == 0:
        raise EmptySource("cannot equalize an empty distribution")
    z0, z1 = float(dist.z[0]), float(dist.z[-1])
    targets = np.linspace(z0, z1, n)
    if z1 <= z0:
        return WeightDistribution(z=targets, w=np.full(n, dist.w.max()))

    spacing = (z1 - z0) / (n - 1)
    cells = np.clip(np.floor((dist.z - z0) / spacing + 0.5).astype(np.int64), 0, n - 1)
    cell_max = np.full(n, -np.inf)
    np.maximum.at(cell_max, cells, dist.w)
    weights = np.where(np.isfinite(cell_max), cell_max, np.interp(targets, dist.z, dist.w))
    return WeightDistribution(z=targets, w=weights)


def max_resample(dist: WeightDistribution, target: BinGrid, far: float | None = None) -> np.ndarray:
    """
    Per target bin [e_j, e_{j+1}]: the maximum of every source weight with
    z inside the bin (edges inclusive) and of the source interpolated at
    both edges. Edges beyond the recorded range take the nearest source
    weight; an open last bin without `far` uses the last source weight at
    its infinite edge.
    """
    if len(dist) == 0:
        raise EmptySource("max_resample needs at least one source sample")
    edges = target.edges(far if far is not None else np.inf)
    n_bins = target.n_bins

    finite = np.isfinite(edges)
    at_edges = np.where(finite, np.interp(np.where(finite, edges, 0.0), dist.z, dist.w), dist.w[-1])
    out = np.maximum(at_edges[:-1], at_edges[1:])

    # Bin j holds z iff e_j <= z <= e_{j+1}; a z on an edge belongs to both neighbours.
    lo = np.searchsorted(edges, dist.z, side="left") - 1
    hi = np.searchsorted(edges, dist.z, side="right") - 1
    for idx in (lo, hi):
        valid = (idx >= 0) & (idx < n_bins)
        np.maximum.at(out, idx[valid], dist.w[valid])
    return out


def normalize(weights: Sequence[float]) -> np.ndarray:
    """w / sum(w); all-zero input becomes uniform."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.size == 0:
        raise EmptySource("cannot normalize an empty weight list")
    return normalize_rows(w[None])[0]


def make_labels(
    raw: WeightDistribution,
    cfg: LabelConfig,
    target: BinGrid,
    far: float | None = None,
) -> np.ndarray:
    """Equalize (optional) -> blur -> max-resample -> normalize."""
    dist = raw
    if cfg.equalize and len(dist) >= 2:
        dist = equalize_samples(dist, cfg.equalize_n or len(dist))
    dist = gaussian_blur_weights(dist, cfg)
    return normalize(max_resample(dist, target, far))


def make_labels_batch(
    z: np.ndarray,
    w: np.ndarray,
    boundaries: np.ndarray,
    far: float | np.ndarray,
    cfg: LabelConfig,
) -> np.ndarray:
    """make_labels for rays stacked as rows: z, w (R, S), boundaries (R, B) -> (R, B)."""
    labels = np.empty(boundaries.shape, dtype=np.float64)
    fars = np.broadcast_to(np.asarray(far, dtype=np.float64), (boundaries.shape[0],))
    for r in range(boundaries.shape[0]):
        grid = BinGrid(boundaries=boundaries[r], open_ended=True)
        labels[r] = make_labels(WeightDistribution(z=z[r], w=w[r]), cfg, grid, float(fars[r]))
    return labels


__all__ = [
    "LabelConfig",
    "equalize_samples",
    "gaussian_blur_weights",
    "make_labels",
    "make_labels_batch",
    "max_resample",
    "normalize",
]
