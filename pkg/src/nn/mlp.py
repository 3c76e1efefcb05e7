"""
Fully connected ReLU network with an optional input skip connection.

Layout: `depth` hidden layers of `width` units followed by a linear head.
Hidden layer `skip_layer` (1-based, 0 disables) consumes concat[h, x],
the previous activation joined with the raw network input. Weights are
stored (fan_in, fan_out) so a batch (B, fan_in) multiplies on the left.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from ..errors import ShapeMismatch


@dataclass
class MlpCache:
    inputs: List[np.ndarray] = field(default_factory=list)  # input of every layer
    pre: List[np.ndarray] = field(default_factory=list)  # hidden pre-activations


@dataclass
class MlpModel:
    input_dim: int
    output_dim: int
    width: int
    depth: int
    skip_layer: int
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @classmethod
    def create(
        cls,
        input_dim: int,
        output_dim: int,
        *,
        width: int = 128,
        depth: int = 4,
        skip_layer: int = 0,
        seed: int = 0,
        dtype: np.dtype | type = np.float32,
    ) -> "MlpModel":
        """
        Kaiming-style uniform init from a seeded generator; biases start at 0.

        Hidden layers draw from U(-sqrt(6/fan_in), sqrt(6/fan_in)) (ReLU gain),
        the linear head from U(-sqrt(3/fan_in), sqrt(3/fan_in)).
        """
        if input_dim < 1 or output_dim < 1 or depth < 0 or (depth > 0 and width < 1):
            raise ShapeMismatch("invalid MLP dimensions")
        if skip_layer < 0 or skip_layer == 1 or skip_layer > depth:
            raise ShapeMismatch(f"skip_layer must be 0 or in [2, depth], got {skip_layer}")

        rng = np.random.default_rng(seed)
        fan_ins = cls._fan_ins(input_dim, width, depth, skip_layer)
        fan_outs = [width] * depth + [output_dim]
        weights, biases = [], []
        for i, (fan_in, fan_out) in enumerate(zip(fan_ins, fan_outs)):
            gain = 3.0 if i == depth else 6.0
            limit = np.sqrt(gain / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype))
            biases.append(np.zeros(fan_out, dtype=dtype))
        return cls(input_dim, output_dim, width, depth, skip_layer, weights, biases)

    @staticmethod
    def _fan_ins(input_dim: int, width: int, depth: int, skip_layer: int) -> List[int]:
        fan_ins = []
        for layer in range(1, depth + 1):
            if layer == 1:
                fan_ins.append(input_dim)
            elif layer == skip_layer:
                fan_ins.append(width + input_dim)
            else:
                fan_ins.append(width)
        fan_ins.append(width if depth > 0 else input_dim)
        return fan_ins

    @property
    def dtype(self) -> np.dtype:
        return self.weights[0].dtype

    def parameters(self) -> List[np.ndarray]:
        """Parameter arrays in the order [W0, b0, W1, b1, ...] (live references)."""
        params: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        return params

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "MlpModel":
        return MlpModel(
            self.input_dim,
            self.output_dim,
            self.width,
            self.depth,
            self.skip_layer,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def astype(self, dtype: np.dtype | type) -> "MlpModel":
        clone = self.copy()
        clone.weights = [w.astype(dtype) for w in clone.weights]
        clone.biases = [b.astype(dtype) for b in clone.biases]
        return clone

    def fingerprint(self) -> str:
        """sha256 over all parameter bytes; changes iff a parameter changes."""
        digest = hashlib.sha256()
        for p in self.parameters():
            digest.update(np.ascontiguousarray(p).tobytes())
        return digest.hexdigest()

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())


def forward(model: MlpModel, x: np.ndarray) -> Tuple[np.ndarray, MlpCache]:
    """Raw (linear-head) outputs (B, output_dim) plus the cache backward needs."""
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ShapeMismatch(f"expected input (B, {model.input_dim}), got {x.shape}")
    if x.shape[0] == 0:
        raise ShapeMismatch("empty input batch")
    x = x.astype(model.dtype, copy=False)

    cache = MlpCache()
    h = x
    for layer in range(1, model.depth + 1):
        if layer == model.skip_layer:
            h = np.concatenate([h, x], axis=-1)
        cache.inputs.append(h)
        z = h @ model.weights[layer - 1] + model.biases[layer - 1]
        cache.pre.append(z)
        h = np.maximum(z, 0)
    cache.inputs.append(h)
    out = h @ model.weights[-1] + model.biases[-1]
    return out, cache


def backward(model: MlpModel, cache: MlpCache, d_out: np.ndarray) -> List[np.ndarray]:
    """
    Reverse-mode gradients for every parameter, ordered like model.parameters().
    """
    d_out = np.asarray(d_out, dtype=model.dtype)
    batch = cache.inputs[0].shape[0]
    if len(cache.inputs) != model.depth + 1 or d_out.shape != (batch, model.output_dim):
        raise ShapeMismatch(f"gradient {d_out.shape} does not match cached forward of batch {batch}")

    grads_w: List[np.ndarray] = [np.empty(0)] * (model.depth + 1)
    grads_b: List[np.ndarray] = [np.empty(0)] * (model.depth + 1)

    grads_w[-1] = cache.inputs[-1].T @ d_out
    grads_b[-1] = d_out.sum(axis=0)
    d_h = d_out @ model.weights[-1].T

    for layer in range(model.depth, 0, -1):
        d_z = d_h * (cache.pre[layer - 1] > 0)
        grads_w[layer - 1] = cache.inputs[layer - 1].T @ d_z
        grads_b[layer - 1] = d_z.sum(axis=0)
        d_h = d_z @ model.weights[layer - 1].T
        if layer == model.skip_layer:
            # Drop the part flowing into the raw input.
            d_h = d_h[:, : model.width]

    grads: List[np.ndarray] = []
    for gw, gb in zip(grads_w, grads_b):
        grads.extend((gw, gb))
    return grads


__all__ = ["MlpCache", "MlpModel", "backward", "forward"]
