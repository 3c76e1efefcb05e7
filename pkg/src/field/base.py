from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Tuple, runtime_checkable

import numpy as np

from ..geometry.rays import SceneBounds


@dataclass(frozen=True, eq=False)
class FieldSample:
    """Color and density of a field at one point seen from one direction."""

    color: np.ndarray  # (3,)
    density: float


@runtime_checkable
class RadianceField(Protocol):
    """
    Anything that maps (points, view directions) to (rgb, sigma).

    Implemented by AnalyticScene (ground truth) and ColorNetwork (learned),
    so every render path accepts either.
    """

    network_label: str
    bounds: SceneBounds

    def query(self, points: np.ndarray, dirs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """points (N, 3), unit dirs (N, 3) -> rgb (N, 3), sigma (N,)."""
        ...
