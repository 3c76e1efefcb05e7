from __future__ import annotations

from .bins import (
    BinGrid,
    BinMode,
    boundary_z,
    centered_log_fractions,
    make_bin_grid,
    segment_fractions,
    segment_points,
)
from .camera import Camera, look_at, orbit_cameras, read_camera_manifest, write_camera_manifest
from .rays import (
    Ray,
    RayParam,
    SceneBounds,
    SegmentParam,
    canonicalize_segment,
    canonicalize_segments,
    parameterize_segments,
    sphere_intersect_segment,
    sphere_intersect_segments,
    z_values,
)

__all__ = [
    "BinGrid",
    "BinMode",
    "Camera",
    "Ray",
    "RayParam",
    "SceneBounds",
    "SegmentParam",
    "boundary_z",
    "canonicalize_segment",
    "canonicalize_segments",
    "centered_log_fractions",
    "look_at",
    "make_bin_grid",
    "orbit_cameras",
    "parameterize_segments",
    "read_camera_manifest",
    "segment_fractions",
    "segment_points",
    "sphere_intersect_segment",
    "sphere_intersect_segments",
    "write_camera_manifest",
    "z_values",
]
