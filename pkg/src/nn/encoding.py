from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PositionalEncoding:
    """
    Sinusoidal encoding gamma(x) = [x, sin(2^0 pi x), cos(2^0 pi x), ...,
    sin(2^(L-1) pi x), cos(2^(L-1) pi x)].

    Blocks are laid out per frequency, each block holding every input
    component, so rows of a batch are encoded independently.
    """

    n_freqs: int
    include_input: bool = True

    def __post_init__(self) -> None:
        if self.n_freqs < 0:
            raise ValueError(f"n_freqs must be >= 0, got {self.n_freqs}")
        if self.n_freqs == 0 and not self.include_input:
            raise ValueError("encoding with no frequencies must include the input")

    def output_dim(self, input_dim: int) -> int:
        return input_dim * (int(self.include_input) + 2 * self.n_freqs)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return encode(self, x)


def encode(pe: PositionalEncoding, x: np.ndarray) -> np.ndarray:
    """Encode x of shape (..., D) into (..., pe.output_dim(D)), keeping x's float dtype."""
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(np.float64)
    parts = [x] if pe.include_input else []
    for level in range(pe.n_freqs):
        scaled = x * (np.pi * 2.0**level)
        parts.append(np.sin(scaled))
        parts.append(np.cos(scaled))
    return np.concatenate(parts, axis=-1)


__all__ = ["PositionalEncoding", "encode"]
