from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import CameraManifestError


@dataclass(frozen=True, eq=False)
class Camera:
    """
    Pinhole camera in the synthetic-dataset convention.

    The camera looks along its local -z axis with +y up; c2w maps camera
    coordinates to world coordinates. fov_x is the horizontal field of view
    in radians.
    """

    c2w: np.ndarray
    fov_x: float
    width: int
    height: int
    name: str = "frame"

    def __post_init__(self) -> None:
        c2w = np.asarray(self.c2w, dtype=np.float64)
        if c2w.shape != (4, 4):
            raise CameraManifestError(f"c2w must be 4x4, got {c2w.shape}")
        if not 0 < self.fov_x < math.pi:
            raise CameraManifestError(f"fov must be in (0, pi), got {self.fov_x}")
        if self.width < 1 or self.height < 1:
            raise CameraManifestError("resolution must be positive")
        object.__setattr__(self, "c2w", c2w)

    @property
    def focal(self) -> float:
        return 0.5 * self.width / math.tan(0.5 * self.fov_x)

    @property
    def position(self) -> np.ndarray:
        return self.c2w[:3, 3].copy()

    def generate_rays(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        One ray per pixel through pixel centers, row-major (y, then x).

        Returns origins (H*W, 3) and unit directions (H*W, 3).
        """
        i, j = np.meshgrid(
            np.arange(self.width, dtype=np.float64) + 0.5,
            np.arange(self.height, dtype=np.float64) + 0.5,
            indexing="xy",
        )
        cam_dirs = np.stack(
            [
                (i - 0.5 * self.width) / self.focal,
                -(j - 0.5 * self.height) / self.focal,
                -np.ones_like(i),
            ],
            axis=-1,
        ).reshape(-1, 3)
        dirs = cam_dirs @ self.c2w[:3, :3].T
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        origins = np.broadcast_to(self.c2w[:3, 3], dirs.shape).copy()
        return origins, dirs


def look_at(position: Sequence[float], target: Sequence[float] = (0.0, 0.0, 0.0)) -> np.ndarray:
    """Camera-to-world matrix placing the camera at `position` facing `target`."""
    position = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - position
    forward /= np.linalg.norm(forward)
    z_axis = -forward
    up = np.array([0.0, 1.0, 0.0])
    if abs(np.dot(up, z_axis)) > 0.999:
        up = np.array([0.0, 0.0, 1.0])
    x_axis = np.cross(up, z_axis)
    x_axis /= np.linalg.norm(x_axis)
    y_axis = np.cross(z_axis, x_axis)

    c2w = np.eye(4)
    c2w[:3, 0] = x_axis
    c2w[:3, 1] = y_axis
    c2w[:3, 2] = z_axis
    c2w[:3, 3] = position
    return c2w


def orbit_cameras(
    n_views: int,
    *,
    distance: float = 4.0,
    elevation_deg: float = 20.0,
    fov_x: float = 0.6911112070083618,
    width: int = 64,
    height: int = 64,
    center: Sequence[float] = (0.0, 0.0, 0.0),
) -> List[Camera]:
    """
    Cameras evenly spaced in azimuth around `center`, alternating elevation
    sign so the set also sees the scene from below.
    """
    center = np.asarray(center, dtype=np.float64)
    cameras: List[Camera] = []
    for k in range(n_views):
        azimuth = 2.0 * math.pi * k / max(n_views, 1)
        elevation = math.radians(elevation_deg) * (1 if k % 2 == 0 else -1)
        offset = distance * np.array(
            [
                math.cos(elevation) * math.sin(azimuth),
                math.sin(elevation),
                math.cos(elevation) * math.cos(azimuth),
            ]
        )
        cameras.append(
            Camera(
                c2w=look_at(center + offset, center),
                fov_x=fov_x,
                width=width,
                height=height,
                name=f"r_{k:03d}",
            )
        )
    return cameras


# --------------------------------------------------------------------------- #
# Camera manifest
# --------------------------------------------------------------------------- #

def read_camera_manifest(path: str | Path) -> List[Camera]:
    """
    Parse a camera manifest (grammar in docs/file_formats.md).

        camera_angle_x <radians>
        resolution <W> <H>
        frame <name> <16 floats, row-major c2w>
    """
    fov_x: float | None = None
    resolution: Tuple[int, int] | None = None
    frames: List[Tuple[str, np.ndarray, int]] = []

    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise CameraManifestError(f"{path} is not UTF-8 text ({exc.reason} at byte {exc.start})") from exc
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        key = tokens[0]
        try:
            if key == "camera_angle_x" and len(tokens) == 2:
                fov_x = float(tokens[1])
            elif key == "resolution" and len(tokens) == 3:
                resolution = (int(tokens[1]), int(tokens[2]))
            elif key == "frame" and len(tokens) == 18:
                matrix = np.array([float(t) for t in tokens[2:]], dtype=np.float64).reshape(4, 4)
                frames.append((tokens[1], matrix, line_no))
            else:
                raise CameraManifestError(f"line {line_no}: unrecognized entry {key!r}")
        except ValueError as exc:
            if isinstance(exc, CameraManifestError):
                raise
            raise CameraManifestError(f"line {line_no}: {exc}") from exc

    if fov_x is None or resolution is None:
        raise CameraManifestError("manifest needs camera_angle_x and resolution")
    if not frames:
        raise CameraManifestError("manifest lists no frames")

    return [
        Camera(c2w=matrix, fov_x=fov_x, width=resolution[0], height=resolution[1], name=name)
        for name, matrix, _ in frames
    ]


def write_camera_manifest(path: str | Path, cameras: Sequence[Camera]) -> None:
    if not cameras:
        raise CameraManifestError("no cameras to write")
    first = cameras[0]
    lines = [
        "# terminerf camera manifest",
        f"camera_angle_x {first.fov_x!r}",
        f"resolution {first.width} {first.height}",
    ]
    for cam in cameras:
        values = " ".join(repr(float(v)) for v in cam.c2w.reshape(-1))
        lines.append(f"frame {cam.name} {values}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


__all__ = [
    "Camera",
    "look_at",
    "orbit_cameras",
    "read_camera_manifest",
    "write_camera_manifest",
]
