from __future__ import annotations

from typing import Tuple

import numpy as np

from ..geometry.bins import BinGrid
from ..geometry.rays import Ray, SceneBounds
from ..rendering.distribution import WeightDistribution
from ..rendering.volume import transmittance_weights
from .base import RadianceField
from .scene import AnalyticScene

# Quadrature resolution for ground-truth weights.
DENSE_BINS = 512


def dense_grid(bounds: SceneBounds, n_bins: int = DENSE_BINS) -> BinGrid:
    """Closed grid of n_bins equal bins over [near, far]."""
    return BinGrid(boundaries=np.linspace(bounds.near, bounds.far, n_bins + 1), open_ended=False)


def oracle_weights(scene: AnalyticScene, ray: Ray, dense_grid: BinGrid) -> WeightDistribution:
    """
    Ground-truth termination weights of one ray.

    Density is sampled at each bin's left edge and held constant across
    the bin, the same discretization the render paths use.
    """
    edges = dense_grid.edges(scene.bounds.far)
    z = edges[:-1]
    points = ray.origin[None, :] + z[:, None] * ray.direction[None, :]
    dirs = np.broadcast_to(ray.direction, points.shape)
    _, sigma = scene.query(points, dirs)
    return WeightDistribution(z=z, w=transmittance_weights(sigma, np.diff(edges)))


def dense_samples(
    field: RadianceField,
    origins: np.ndarray,
    dirs: np.ndarray,
    bounds: SceneBounds,
    n_bins: int = DENSE_BINS,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Query a field at the left edges of n_bins equal bins per ray.

    Returns z (R, n), rgb (R, n, 3), sigma (R, n), deltas (R, n).
    """
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    n_rays = origins.shape[0]

    edges = np.linspace(bounds.near, bounds.far, n_bins + 1)
    z = np.broadcast_to(edges[:-1], (n_rays, n_bins))
    deltas = np.broadcast_to(np.diff(edges), (n_rays, n_bins))
    points = origins[:, None, :] + z[..., None] * dirs[:, None, :]
    view = np.broadcast_to(dirs[:, None, :], points.shape)
    rgb, sigma = field.query(points.reshape(-1, 3), view.reshape(-1, 3))
    return (
        np.ascontiguousarray(z),
        rgb.reshape(n_rays, n_bins, 3),
        sigma.reshape(n_rays, n_bins),
        np.ascontiguousarray(deltas),
    )


__all__ = ["DENSE_BINS", "dense_grid", "dense_samples", "oracle_weights"]
