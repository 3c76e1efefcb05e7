from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Tuple

import numpy as np

from ..errors import InvalidGrid, RayMissesScene

RayParam = Literal["segment", "sphere"]

_UNIT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class SceneBounds:
    """
    Sphere circumscribing the scene plus the z-range rays are integrated over.

    segment_length is the constant segment length used by the segment
    parameterization (4.0 follows the usual synthetic-scene ray length).
    """

    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 1.8
    segment_length: float = 4.0
    near: float = 2.0
    far: float = 6.0

    def __post_init__(self) -> None:
        if len(self.center) != 3:
            raise InvalidGrid("bounds center must be a 3-vector")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise InvalidGrid(f"bounds radius must be positive, got {self.radius}")
        if not self.segment_length > 0:
            raise InvalidGrid(f"segment length must be positive, got {self.segment_length}")
        if not 0 < self.near < self.far:
            raise InvalidGrid(f"need 0 < near < far, got near={self.near} far={self.far}")

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self) -> None:
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        direction = np.asarray(self.direction, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(direction) - 1.0) > _UNIT_TOL:
            raise InvalidGrid("ray direction must be unit length")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "direction", direction)

    @classmethod
    def towards(cls, origin, direction) -> "Ray":
        """Build a ray, normalizing the direction first."""
        d = np.asarray(direction, dtype=np.float64)
        return cls(origin=np.asarray(origin, dtype=np.float64), direction=d / np.linalg.norm(d))

    def z_of(self, point: np.ndarray) -> float:
        """Distance of a point on the ray from the ray origin."""
        return float(np.dot(np.asarray(point) - self.origin, self.direction))


@dataclass(frozen=True, eq=False)
class SegmentParam:
    """Two-point ray representation; direction is the order a -> b."""

    a: np.ndarray
    b: np.ndarray
    form: RayParam = "segment"

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.b - self.a))

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.a + self.b)


# --------------------------------------------------------------------------- #
# Vectorized parameterizations
# --------------------------------------------------------------------------- #

def _perpendicular(origins: np.ndarray, dirs: np.ndarray, center: np.ndarray) -> np.ndarray:
    # Offset of the line's closest point from the center. Depends only on the
    # line and its direction, not on where the origin sits along it.
    w = origins - center
    along = np.sum(w * dirs, axis=-1, keepdims=True)
    return w - along * dirs


def _origin_outside(origins: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    return np.linalg.norm(origins - center, axis=-1) > radius


def canonicalize_segments(
    origins: np.ndarray,
    dirs: np.ndarray,
    bounds: SceneBounds,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Constant-length segment parameterization for a batch of rays.

    Returns (a, b, hit): a/b of shape (R, 3) with |b - a| = segment_length and
    midpoint at the line's closest point to bounds.center; hit is False for
    rays passing at or beyond the sphere radius or starting inside it.
    """
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    center = bounds.center_array

    perp = _perpendicular(origins, dirs, center)
    dist = np.linalg.norm(perp, axis=-1)
    hit = (dist < bounds.radius) & _origin_outside(origins, center, bounds.radius)

    mid = center + perp
    half = 0.5 * bounds.segment_length
    return mid - half * dirs, mid + half * dirs, hit


def sphere_intersect_segments(
    origins: np.ndarray,
    dirs: np.ndarray,
    bounds: SceneBounds,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Sphere-intersection parameterization for a batch of rays.

    a is the entry point and b the exit point. Tangent rays (zero-length
    chord) count as misses.
    """
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    center = bounds.center_array

    perp = _perpendicular(origins, dirs, center)
    disc = bounds.radius**2 - np.sum(perp * perp, axis=-1)
    hit = (disc > 0) & _origin_outside(origins, center, bounds.radius)

    half_chord = np.sqrt(np.clip(disc, 0.0, None))[:, None]
    mid = center + perp
    return mid - half_chord * dirs, mid + half_chord * dirs, hit


def parameterize_segments(
    origins: np.ndarray,
    dirs: np.ndarray,
    bounds: SceneBounds,
    form: RayParam,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if form == "segment":
        return canonicalize_segments(origins, dirs, bounds)
    if form == "sphere":
        return sphere_intersect_segments(origins, dirs, bounds)
    raise ValueError(f"unknown ray parameterization: {form!r}")


# --------------------------------------------------------------------------- #
# Per-ray operations
# --------------------------------------------------------------------------- #

def _single(ray: Ray, bounds: SceneBounds, form: RayParam) -> SegmentParam:
    center = bounds.center_array
    if np.linalg.norm(ray.origin - center) <= bounds.radius:
        raise InvalidGrid("ray origin must lie outside the scene sphere")
    a, b, hit = parameterize_segments(ray.origin[None], ray.direction[None], bounds, form)
    if not hit[0]:
        raise RayMissesScene(
            f"ray passes {np.linalg.norm(_perpendicular(ray.origin[None], ray.direction[None], center)):.6g} "
            f"from the center, sphere radius is {bounds.radius:.6g}"
        )
    return SegmentParam(a=a[0], b=b[0], form=form)


def canonicalize_segment(ray: Ray, bounds: SceneBounds) -> SegmentParam:
    """
    Constant-length segment (A, B) of one ray.

    Same geometric line and direction gives the same (A, B) no matter which
    point of the line is used as origin.
    """
    return _single(ray, bounds, "segment")


def sphere_intersect_segment(ray: Ray, bounds: SceneBounds) -> SegmentParam:
    """Entry/exit points of one ray on the circumscribing sphere."""
    return _single(ray, bounds, "sphere")


def z_values(points: np.ndarray, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """
    z of points (R, n, 3) along their rays, measured from each ray origin.
    """
    return np.einsum("rnk,rk->rn", points - origins[:, None, :], dirs)


__all__ = [
    "Ray",
    "RayParam",
    "SceneBounds",
    "SegmentParam",
    "canonicalize_segment",
    "canonicalize_segments",
    "parameterize_segments",
    "sphere_intersect_segment",
    "sphere_intersect_segments",
    "z_values",
]
