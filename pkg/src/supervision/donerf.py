"""
Single-depth classification labels (the DONeRF-style baseline).

A ray's depth is one-hot encoded over its bins, spread to neighbouring
pixels with a radially penalized max, then smeared along the ray with a
triangular filter.
"""

from __future__ import annotations

import numpy as np

from ..errors import DepthOutOfRange, ShapeMismatch
from ..geometry.bins import BinGrid
from ..rendering.distribution import WeightDistribution
from ..rendering.sampling import normalize_rows

# Rays with less termination mass than this are treated as background.
MIN_DEPTH_MASS = 1e-3


def donerf_classify(depth: float, grid: BinGrid, near: float, far: float) -> np.ndarray:
    """
    One-hot vector over the grid's bins: bin z gets 1 when e_z <= depth < e_{z+1}.

    depth must lie in [near, far]. A depth before the first boundary
    belongs to the first bin; one at or past the closing edge lands in the
    last bin.
    """
    if not np.isfinite(depth) or depth < near or depth > far:
        raise DepthOutOfRange(f"depth {depth:.6g} outside [{near:.6g}, {far:.6g}]")
    edges = grid.edges(far)
    idx = int(np.clip(np.searchsorted(edges, depth, side="right") - 1, 0, grid.n_bins - 1))
    onehot = np.zeros(grid.n_bins)
    onehot[idx] = 1.0
    return onehot


def depth_from_weights(dist: WeightDistribution, far: float) -> float:
    """
    Depth where the cumulative termination mass first reaches half the ray's
    total; `far` when the ray carries almost no mass.
    """
    total = dist.total
    if total < MIN_DEPTH_MASS:
        return float(far)
    cdf = np.cumsum(dist.w)
    idx = int(np.searchsorted(cdf, 0.5 * total, side="left"))
    return float(dist.z[min(idx, len(dist) - 1)])


def _neighbourhood_max(classes: np.ndarray, kernel_size: int) -> np.ndarray:
    half = kernel_size // 2
    if half == 0:
        return classes.copy()
    height, width, _ = classes.shape
    out = np.zeros_like(classes)
    for i in range(-half, half + 1):
        for j in range(-half, half + 1):
            penalty = np.hypot(i, j) / (np.sqrt(2.0) * half)
            ys = slice(max(0, -i), min(height, height - i))
            xs = slice(max(0, -j), min(width, width - j))
            src_ys = slice(ys.start + i, ys.stop + i)
            src_xs = slice(xs.start + j, xs.stop + j)
            np.maximum(out[ys, xs], classes[src_ys, src_xs] - penalty, out=out[ys, xs])
    return np.clip(out, 0.0, None)


def _triangle_filter(classes: np.ndarray, z_size: int) -> np.ndarray:
    half = z_size // 2
    if half == 0:
        return classes.copy()
    n_bins = classes.shape[-1]
    out = np.zeros_like(classes)
    for k in range(-half, half + 1):
        weight = (half + 1 - abs(k)) / (half + 1)
        dst = slice(max(0, -k), min(n_bins, n_bins - k))
        src = slice(dst.start + k, dst.stop + k)
        out[..., dst] += weight * classes[..., src]
    return np.minimum(out, 1.0)


def donerf_blur_filter(classes: np.ndarray, kernel_size: int, z_size: int) -> np.ndarray:
    """
    classes (H, W, B) -> smoothed labels (H, W, B) in [0, 1].

    Spatial step: max over the K x K neighbourhood of C minus
    sqrt(i^2 + j^2) / (sqrt(2) * floor(K/2)), floored at 0. Depth step:
    triangular weights (floor(Z/2) + 1 - |i|) / (floor(Z/2) + 1) summed
    along z and capped at 1.
    """
    classes = np.asarray(classes, dtype=np.float64)
    if classes.ndim != 3:
        raise ShapeMismatch(f"expected an (H, W, bins) label grid, got {classes.shape}")
    if kernel_size < 1 or z_size < 1:
        raise ShapeMismatch("kernel sizes must be >= 1")
    return _triangle_filter(_neighbourhood_max(classes, kernel_size), z_size)


def donerf_labels(
    depths: np.ndarray,
    boundaries: np.ndarray,
    near: float,
    far: float,
    kernel_size: int = 5,
    z_size: int = 5,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """
    Normalized label image for one camera.

    depths (H, W) and per-ray bin boundaries (H, W, B). Depths are clamped
    into [near, far] before classification. Pixels outside `mask`
    are left unclassified and contribute nothing to their neighbours.
    """
    height, width, n_bins = boundaries.shape
    if depths.shape != (height, width):
        raise ShapeMismatch(f"depths {depths.shape} vs boundaries {boundaries.shape}")
    mask = np.ones((height, width), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    classes = np.zeros((height, width, n_bins))
    for y in range(height):
        for x in range(width):
            if not mask[y, x]:
                continue
            grid = BinGrid(boundaries=boundaries[y, x], open_ended=True)
            depth = float(np.clip(depths[y, x], near, far))
            classes[y, x] = donerf_classify(depth, grid, near, far)
    smoothed = donerf_blur_filter(classes, kernel_size, z_size)
    return normalize_rows(smoothed.reshape(-1, n_bins)).reshape(height, width, n_bins)


__all__ = [
    "MIN_DEPTH_MASS",
    "depth_from_weights",
    "donerf_blur_filter",
    "donerf_classify",
    "donerf_labels",
]
