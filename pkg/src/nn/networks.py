from __future__ import annotations

import threading
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Tuple

import numpy as np

from ..errors import ShapeMismatch
from ..geometry.bins import BinMode, segment_fractions, segment_points
from ..geometry.rays import RayParam, SceneBounds, parameterize_segments
from ..metrics import FORWARD_PASSES
from .encoding import PositionalEncoding, encode
from .mlp import MlpCache, MlpModel, backward, forward


@dataclass(frozen=True)
class Architecture:
    width: int = 128
    depth: int = 4
    skip_layer: int = 3
    pos_freqs: int = 6
    dir_freqs: int = 2


DESK_ARCH = Architecture()
PAPER_ARCH = Architecture(width=256, depth=8, skip_layer=5, pos_freqs=10, dir_freqs=4)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0, x).astype(x.dtype, copy=False)


class _PassCounter:
    """Thread-safe forward-pass tally mirrored into the Prometheus counter."""

    def __init__(self, label: str):
        self.label = label
        self.forward_passes = 0
        self._lock = threading.Lock()

    def _count(self, n: int) -> None:
        with self._lock:
            self.forward_passes += n
        FORWARD_PASSES.labels(network=self.label).inc(n)


def _bounds_dict(bounds: SceneBounds) -> Dict[str, Any]:
    return {
        "center": list(bounds.center),
        "radius": bounds.radius,
        "segment_length": bounds.segment_length,
        "near": bounds.near,
        "far": bounds.far,
    }


def _bounds_from(meta: Dict[str, Any]) -> SceneBounds:
    return SceneBounds(
        center=tuple(meta["center"]),
        radius=meta["radius"],
        segment_length=meta["segment_length"],
        near=meta["near"],
        far=meta["far"],
    )


# --------------------------------------------------------------------------- #
# Color network
# --------------------------------------------------------------------------- #

@dataclass
class ColorCache:
    mlp: MlpCache
    raw: np.ndarray
    rgb: np.ndarray


class ColorNetwork(_PassCounter):
    """
    (position, view direction) -> (rgb, sigma).

    Positions are centered and scaled by the scene sphere before encoding.
    RGB goes through a sigmoid, sigma through softplus. Every queried point
    counts as one forward pass.
    """

    def __init__(
        self,
        bounds: SceneBounds,
        arch: Architecture = DESK_ARCH,
        *,
        seed: int = 0,
        label: str = "color",
        mlp: MlpModel | None = None,
    ):
        super().__init__(label)
        self.bounds = bounds
        self.arch = arch
        self.pos_enc = PositionalEncoding(arch.pos_freqs)
        self.dir_enc = PositionalEncoding(arch.dir_freqs)
        in_dim = self.pos_enc.output_dim(3) + self.dir_enc.output_dim(3)
        self.mlp = mlp or MlpModel.create(
            in_dim, 4, width=arch.width, depth=arch.depth, skip_layer=arch.skip_layer, seed=seed
        )
        if self.mlp.input_dim != in_dim or self.mlp.output_dim != 4:
            raise ShapeMismatch("MLP shape does not match the color network encodings")

    @property
    def network_label(self) -> str:
        return self.label

    def _inputs(self, points: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
        if points.shape != dirs.shape:
            raise ShapeMismatch(f"points {points.shape} vs dirs {dirs.shape}")
        local = (points - self.bounds.center_array) / self.bounds.radius
        feats = np.concatenate([encode(self.pos_enc, local), encode(self.dir_enc, dirs)], axis=-1)
        return feats.astype(self.mlp.dtype)

    def forward(self, points: np.ndarray, dirs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, ColorCache]:
        raw, mlp_cache = forward(self.mlp, self._inputs(points, dirs))
        self._count(raw.shape[0])
        rgb = sigmoid(raw[:, :3])
        sigma = softplus(raw[:, 3])
        return rgb, sigma, ColorCache(mlp=mlp_cache, raw=raw, rgb=rgb)

    def query(self, points: np.ndarray, dirs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        rgb, sigma, _ = self.forward(points, dirs)
        return rgb, sigma

    def backward(self, cache: ColorCache, d_rgb: np.ndarray, d_sigma: np.ndarray) -> List[np.ndarray]:
        d_raw = np.empty_like(cache.raw)
        d_raw[:, :3] = d_rgb.reshape(-1, 3) * cache.rgb * (1.0 - cache.rgb)
        d_raw[:, 3] = d_sigma.reshape(-1) * sigmoid(cache.raw[:, 3])
        return backward(self.mlp, cache.mlp, d_raw)

    def metadata(self) -> Dict[str, Any]:
        return {"kind": "color", "label": self.label, "arch": asdict(self.arch), "bounds": _bounds_dict(self.bounds)}

    @classmethod
    def from_metadata(cls, meta: Dict[str, Any], mlp: MlpModel) -> "ColorNetwork":
        return cls(_bounds_from(meta["bounds"]), Architecture(**meta["arch"]), label=meta.get("label", "color"), mlp=mlp)


# --------------------------------------------------------------------------- #
# Sampling network
# --------------------------------------------------------------------------- #

@dataclass
class SamplerCache:
    mlp: MlpCache
    raw: np.ndarray
    soft: np.ndarray
    total: np.ndarray
    weights: np.ndarray


class SamplingNetwork(_PassCounter):
    """
    Discretized ray -> normalized weights over its n_bins bins.

    The ray is represented by its two-point segment (constant-length or
    sphere-intersection form); the n_bins boundary points, centered and
    scaled by the scene sphere, are encoded and concatenated into one input
    row. One call per ray counts as one forward pass.
    """

    EPS = 1e-8

    def __init__(
        self,
        bounds: SceneBounds,
        *,
        n_bins: int = 31,
        mode: BinMode = "centered_log",
        form: RayParam = "segment",
        arch: Architecture = DESK_ARCH,
        seed: int = 0,
        mlp: MlpModel | None = None,
    ):
        super().__init__("sampler")
        self.bounds = bounds
        self.n_bins = n_bins
        self.mode = mode
        self.form = form
        self.arch = arch
        self.fractions = segment_fractions(mode, n_bins)
        self.pos_enc = PositionalEncoding(arch.pos_freqs)
        in_dim = n_bins * self.pos_enc.output_dim(3)
        self.mlp = mlp or MlpModel.create(
            in_dim, n_bins, width=arch.width, depth=arch.depth, skip_layer=arch.skip_layer, seed=seed
        )
        if self.mlp.input_dim != in_dim or self.mlp.output_dim != n_bins:
            raise ShapeMismatch("MLP shape does not match the sampler's bin count")

    def segments(self, origins: np.ndarray, dirs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(a, b, hit) of each ray in this sampler's parameterization."""
        return parameterize_segments(origins, dirs, self.bounds, self.form)

    def _inputs(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        pts = segment_points(a, b, self.fractions)
        local = (pts - self.bounds.center_array) / self.bounds.radius
        return encode(self.pos_enc, local).reshape(pts.shape[0], -1).astype(self.mlp.dtype)

    def forward(self, a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, SamplerCache]:
        raw, mlp_cache = forward(self.mlp, self._inputs(a, b))
        self._count(raw.shape[0])
        soft = softplus(raw)
        total = soft.sum(axis=-1, keepdims=True) + self.EPS
        weights = soft / total
        return weights, SamplerCache(mlp=mlp_cache, raw=raw, soft=soft, total=total, weights=weights)

    def predict(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        weights, _ = self.forward(a, b)
        return weights

    def backward(self, cache: SamplerCache, d_weights: np.ndarray) -> List[np.ndarray]:
        d_weights = np.asarray(d_weights, dtype=cache.weights.dtype)
        d_soft = (d_weights - np.sum(d_weights * cache.weights, axis=-1, keepdims=True)) / cache.total
        d_raw = d_soft * sigmoid(cache.raw)
        return backward(self.mlp, cache.mlp, d_raw)

    def metadata(self) -> Dict[str, Any]:
        return {
            "kind": "sampler",
            "n_bins": self.n_bins,
            "mode": self.mode,
            "form": self.form,
            "arch": asdict(self.arch),
            "bounds": _bounds_dict(self.bounds),
        }

    @classmethod
    def from_metadata(cls, meta: Dict[str, Any], mlp: MlpModel) -> "SamplingNetwork":
        return cls(
            _bounds_from(meta["bounds"]),
            n_bins=meta["n_bins"],
            mode=meta["mode"],
            form=meta["form"],
            arch=Architecture(**meta["arch"]),
            mlp=mlp,
        )


__all__ = [
    "Architecture",
    "ColorCache",
    "ColorNetwork",
    "DESK_ARCH",
    "PAPER_ARCH",
    "SamplerCache",
    "SamplingNetwork",
    "sigmoid",
    "softplus",
]
