from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch


@dataclass(frozen=True, eq=False)
class WeightDistribution:
    """
    Paired (z, w) samples of ray-termination mass along one ray.

    z is measured from the ray origin and must be non-decreasing (sorted
    sample unions may repeat a value); w is non-negative.
    """

    z: np.ndarray
    w: np.ndarray

    def __post_init__(self) -> None:
        z = np.asarray(self.z, dtype=np.float64).reshape(-1)
        w = np.asarray(self.w, dtype=np.float64).reshape(-1)
        if z.shape != w.shape:
            raise ShapeMismatch(f"z has {z.size} entries, w has {w.size}")
        if np.any(np.diff(z) < 0):
            raise ShapeMismatch("z must be sorted ascending")
        if np.any(w < 0):
            raise ShapeMismatch("weights must be non-negative")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "w", w)

    def __len__(self) -> int:
        return int(self.z.size)

    @property
    def total(self) -> float:
        return float(self.w.sum())

    def is_normalized(self, tol: float = 1e-6) -> bool:
        return abs(self.total - 1.0) <= tol
