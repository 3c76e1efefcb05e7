from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from ..errors import InvalidCount, InvalidGrid
from .rays import Ray, SegmentParam

BinMode = Literal["centered_log", "equidistant"]


@dataclass(frozen=True, eq=False)
class BinGrid:
    """
    Ordered bin boundaries (z-values) along one ray.

    With open_ended=True every boundary starts a bin and the last bin runs
    to infinity (in practice to the render `far`), so n_bins == len(boundaries).
    A closed grid has len(boundaries) - 1 bins.
    """

    boundaries: np.ndarray
    open_ended: bool = True

    def __post_init__(self) -> None:
        boundaries = np.asarray(self.boundaries, dtype=np.float64).reshape(-1)
        if boundaries.size == 0 or (not self.open_ended and boundaries.size < 2):
            raise InvalidGrid("bin grid needs at least one bin")
        if np.any(np.diff(boundaries) <= 0):
            raise InvalidGrid("bin boundaries must be strictly increasing")
        if boundaries[0] < 0:
            raise InvalidGrid(f"first boundary {boundaries[0]:.6g} lies behind the ray origin")
        object.__setattr__(self, "boundaries", boundaries)

    @property
    def n_bins(self) -> int:
        return self.boundaries.size if self.open_ended else self.boundaries.size - 1

    def edges(self, far: float = np.inf) -> np.ndarray:
        """
        Lower/upper edges of every bin, shape (n_bins + 1,).

        The open bin is closed at max(far, last boundary).
        """
        if not self.open_ended:
            return self.boundaries.copy()
        return np.append(self.boundaries, max(far, self.boundaries[-1]))


def centered_log_fractions(n_points: int) -> np.ndarray:
    """
    Segment fractions dense around the midpoint, log-spaced toward both ends.

    For even N >= 4 returns N - 1 strictly increasing values: the lower half
    1 - 2^((1 - i)/(N/2 - 1)), i = 1..N/2-1, followed by the upper half
    2^((j - N/2)/(N/2 - 1)), j = 1..N/2. First value 0, last 1, and
    s_k + s_{N-k} = 1.
    """
    if n_points < 4 or n_points % 2:
        raise InvalidCount(f"centered-log fractions need an even count >= 4, got {n_points}")
    half = n_points // 2
    denom = half - 1
    lower = 1.0 - np.exp2((1.0 - np.arange(1, half)) / denom)
    upper = np.exp2((np.arange(1, half + 1) - half) / denom)
    return np.concatenate([lower, upper])


def segment_fractions(mode: BinMode, n_bins: int) -> np.ndarray:
    """
    n_bins fractions of the segment a -> b used as bin boundaries.

    centered_log evaluates the formulas with N = n_bins + 1, so n_bins must
    be odd there.
    """
    if n_bins < 3:
        raise InvalidCount(f"bin grids need at least 3 bins, got {n_bins}")
    if mode == "centered_log":
        return centered_log_fractions(n_bins + 1)
    if mode == "equidistant":
        return np.linspace(0.0, 1.0, n_bins)
    raise InvalidCount(f"unknown bin mode: {mode!r}")


def segment_points(a: np.ndarray, b: np.ndarray, fractions: np.ndarray) -> np.ndarray:
    """Points a + s (b - a) for a batch of segments: (R, 3) x (n,) -> (R, n, 3)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    return a[:, None, :] + fractions[None, :, None] * (b - a)[:, None, :]


def boundary_z(
    a: np.ndarray,
    b: np.ndarray,
    origins: np.ndarray,
    dirs: np.ndarray,
    fractions: np.ndarray,
) -> np.ndarray:
    """
    z-values (R, n) of the boundary points along each ray.

    Since a and b lie on the ray, z is affine in the fraction.
    """
    za = np.sum((a - origins) * dirs, axis=-1)
    zb = np.sum((b - origins) * dirs, axis=-1)
    return za[:, None] + fractions[None, :] * (zb - za)[:, None]


def make_bin_grid(seg: SegmentParam, ray: Ray, mode: BinMode, n_bins: int) -> BinGrid:
    """
    Open-ended bin grid of one ray; boundaries measured from the ray origin.
    """
    fractions = segment_fractions(mode, n_bins)
    z = boundary_z(seg.a[None], seg.b[None], ray.origin[None], ray.direction[None], fractions)[0]
    return BinGrid(boundaries=z, open_ended=True)


__all__ = [
    "BinGrid",
    "BinMode",
    "boundary_z",
    "centered_log_fractions",
    "make_bin_grid",
    "segment_fractions",
    "segment_points",
]
