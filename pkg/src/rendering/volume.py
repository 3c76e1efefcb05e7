"""
Emission-absorption quadrature.

Weights follow the piecewise-constant rule

    w_i = exp(-sum_{j<i} sigma_j delta_j) * (1 - exp(-sigma_i delta_i))

with sigma sampled at the left edge of each interval. The batched
functions (composite_rays / composite_rays_backward) carry the training
paths; transmittance_weights and composite_color are the per-ray forms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ..errors import NegativeDensity, ShapeMismatch


@dataclass
class CompositeCache:
    rgb: np.ndarray  # (R, S, 3)
    deltas: np.ndarray  # (R, S)
    weights: np.ndarray  # (R, S)
    trans_after: np.ndarray  # (R, S) transmittance past each sample
    background: np.ndarray  # (3,)


def deltas_from_z(z: np.ndarray, far: float | np.ndarray) -> np.ndarray:
    """
    Interval lengths for sorted samples z (..., S).

    The last interval is capped at `far`: delta_last = max(far - z_last, 0).
    """
    z = np.asarray(z, dtype=np.float64)
    far = np.asarray(far, dtype=np.float64)
    last = np.clip(far - z[..., -1], 0.0, None)
    return np.concatenate([np.diff(z, axis=-1), last[..., None]], axis=-1)


def _transmittance(sigma: np.ndarray, deltas: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    optical = sigma * deltas
    cum = np.cumsum(optical, axis=-1)
    trans_after = np.exp(-cum)
    trans_before = np.exp(-(cum - optical))
    weights = trans_before * -np.expm1(-optical)
    return weights, trans_before, trans_after


def transmittance_weights(sigmas: Sequence[float], deltas: Sequence[float]) -> np.ndarray:
    """
    Termination weights of one ray.

    0 <= w_i <= 1 and sum(w) = 1 - exp(-sum(sigma * delta)).
    """
    sigma = np.asarray(sigmas, dtype=np.float64).reshape(-1)
    delta = np.asarray(deltas, dtype=np.float64).reshape(-1)
    if sigma.shape != delta.shape:
        raise ShapeMismatch(f"{sigma.size} densities vs {delta.size} intervals")
    if np.any(sigma < 0):
        raise NegativeDensity("densities must be non-negative")
    if np.any(delta < 0):
        raise ShapeMismatch("interval lengths must be non-negative")
    weights, _, _ = _transmittance(sigma, delta)
    return weights


def transmittance_weights_batch(sigma: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """Row-wise termination weights for (R, S) densities and interval lengths."""
    weights, _, _ = _transmittance(np.asarray(sigma, dtype=np.float64), np.asarray(deltas, dtype=np.float64))
    return weights


def composite_color(
    weights: Sequence[float],
    colors: Sequence[Sequence[float]],
    background: Sequence[float] = (1.0, 1.0, 1.0),
) -> np.ndarray:
    """C = sum w_i c_i + (1 - sum w_i) * background, clamped to [0, 1]."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    c = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
    if w.size != c.shape[0]:
        raise ShapeMismatch(f"{w.size} weights vs {c.shape[0]} colors")
    bg = np.asarray(background, dtype=np.float64)
    color = w @ c + (1.0 - w.sum()) * bg
    return np.clip(color, 0.0, 1.0)


def composite_rays(
    rgb: np.ndarray,
    sigma: np.ndarray,
    deltas: np.ndarray,
    background: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, CompositeCache]:
    """
    Batched compositing.

    rgb (R, S, 3), sigma (R, S), deltas (R, S) -> colors (R, 3), weights (R, S).
    Colors are not clamped; with rgb in [0, 1] they already lie in [0, 1].
    """
    if sigma.shape != deltas.shape or rgb.shape[:-1] != sigma.shape:
        raise ShapeMismatch(f"rgb {rgb.shape}, sigma {sigma.shape}, deltas {deltas.shape}")
    if np.any(sigma < 0):
        raise NegativeDensity("densities must be non-negative")
    background = np.asarray(background, dtype=rgb.dtype)

    weights, _, trans_after = _transmittance(sigma, deltas)
    colors = np.einsum("rs,rsk->rk", weights, rgb) + trans_after[:, -1:] * background
    cache = CompositeCache(
        rgb=rgb,
        deltas=deltas,
        weights=weights,
        trans_after=trans_after,
        background=background,
    )
    return colors, weights, cache


def composite_rays_backward(
    cache: CompositeCache,
    d_color: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gradients of a loss w.r.t. rgb and sigma given dL/dC (R, 3).

      dC/dc_k     = w_k
      dC/dsigma_k = delta_k * (T_{k+1} c_k - sum_{i>k} w_i c_i - T_{N+1} bg)
    """
    d_rgb = cache.weights[..., None] * d_color[:, None, :]

    contrib = np.einsum("rsk,rk->rs", cache.rgb, d_color) * cache.weights
    # Radiance arriving from behind sample k, projected on dL/dC.
    suffix = np.cumsum(contrib[:, ::-1], axis=-1)[:, ::-1] - contrib
    tail = cache.trans_after[:, -1] * (d_color @ cache.background)
    behind = suffix + tail[:, None]

    front = cache.trans_after * np.einsum("rsk,rk->rs", cache.rgb, d_color)
    d_sigma = cache.deltas * (front - behind)
    return d_rgb, d_sigma


__all__ = [
    "CompositeCache",
    "composite_color",
    "composite_rays",
    "composite_rays_backward",
    "deltas_from_z",
    "transmittance_weights",
    "transmittance_weights_batch",
]
