"""
Ray datasets for training.

A RayDataset holds every pixel ray of a camera set with its target color.
Ray ids are global pixel indices (camera * H * W + y * W + x), so depth
records and single-depth labels can find a ray's image neighbours again.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import numpy as np
import structlog

from ..config import Settings, get_settings
from ..errors import CameraManifestError, DimensionMismatch, InvalidCount, ShapeMismatch
from ..field.scene import AnalyticScene
from ..geometry.camera import Camera
from ..geometry.rays import RayParam, SceneBounds, parameterize_segments
from ..rendering.image_io import ImageBuffer
from ..rendering.renderer import RenderConfig, RenderModels, render_rays

logger = structlog.get_logger("training.data")


@dataclass(frozen=True, eq=False)
class RayBatch:
    """One optimizer step's rays, their segments (when known) and target colors."""

    ray_ids: np.ndarray  # (R,)
    origins: np.ndarray  # (R, 3)
    dirs: np.ndarray  # (R, 3)
    colors: np.ndarray  # (R, 3)
    a: np.ndarray | None = None
    b: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = self.ray_ids.shape[0]
        shapes = [self.origins.shape, self.dirs.shape, self.colors.shape]
        if self.a is not None:
            shapes += [self.a.shape, self.b.shape]
        if any(s != (n, 3) for s in shapes):
            raise ShapeMismatch(f"ray batch arrays disagree: {n} ids, shapes {shapes}")
        if n and (self.colors.min() < 0 or self.colors.max() > 1):
            raise ShapeMismatch("target colors must lie in [0, 1]")

    def __len__(self) -> int:
        return int(self.ray_ids.shape[0])


@dataclass(frozen=True, eq=False)
class RayDataset:
    bounds: SceneBounds
    image_shape: Tuple[int, int]  # (H, W) shared by every camera
    ray_ids: np.ndarray
    origins: np.ndarray
    dirs: np.ndarray
    colors: np.ndarray
    background: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    a: np.ndarray | None = None
    b: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.ray_ids.shape[0])

    @property
    def camera_index(self) -> np.ndarray:
        height, width = self.image_shape
        return self.ray_ids // (height * width)

    @classmethod
    def from_images(
        cls,
        cameras: Sequence[Camera],
        images: Sequence[ImageBuffer],
        bounds: SceneBounds,
        background: Tuple[float, float, float] = (1.0, 1.0, 1.0),
    ) -> "RayDataset":
        if not cameras or len(cameras) != len(images):
            raise DimensionMismatch(f"{len(cameras)} cameras vs {len(images)} images")
        shape = _shared_shape(cameras)
        origins, dirs, colors = [], [], []
        for cam, img in zip(cameras, images):
            if (img.height, img.width) != shape:
                raise DimensionMismatch(f"image for {cam.name} is {img.width}x{img.height}, camera is {shape[1]}x{shape[0]}")
            o, d = cam.generate_rays()
            origins.append(o)
            dirs.append(d)
            colors.append(img.pixels.reshape(-1, 3).astype(np.float64))
        n = sum(o.shape[0] for o in origins)
        return cls(
            bounds=bounds,
            image_shape=shape,
            ray_ids=np.arange(n, dtype=np.int64),
            origins=np.concatenate(origins),
            dirs=np.concatenate(dirs),
            colors=np.concatenate(colors),
            background=background,
        )

    @classmethod
    def from_scene(
        cls,
        scene: AnalyticScene,
        cameras: Sequence[Camera],
        *,
        background: Tuple[float, float, float] = (1.0, 1.0, 1.0),
        settings: Settings | None = None,
    ) -> "RayDataset":
        """Targets are oracle_dense renders of the scene."""
        log = logger.bind(cameras=len(cameras), primitives=len(scene.primitives))
        log.info("dataset_build_start")
        start = time.perf_counter()

        cfg = RenderConfig(path="oracle_dense", background=background)
        images: List[ImageBuffer] = []
        for cam in cameras:
            origins, dirs = cam.generate_rays()
            colors, _ = render_rays(RenderModels(field=scene), origins, dirs, cfg, settings=settings or get_settings())
            images.append(ImageBuffer.from_rays(colors, cam.height, cam.width))
        dataset = cls.from_images(cameras, images, scene.bounds, background)

        log.info("dataset_build_end", rays=len(dataset), duration_ms=int((time.perf_counter() - start) * 1000))
        return dataset

    def subset(self, idx: np.ndarray) -> "RayDataset":
        return replace(
            self,
            ray_ids=self.ray_ids[idx],
            origins=self.origins[idx],
            dirs=self.dirs[idx],
            colors=self.colors[idx],
            a=None if self.a is None else self.a[idx],
            b=None if self.b is None else self.b[idx],
        )

    def with_segments(self, form: RayParam) -> "RayDataset":
        """Rays that hit the scene sphere, with their two-point segments attached."""
        a, b, hit = parameterize_segments(self.origins, self.dirs, self.bounds, form)
        idx = np.flatnonzero(hit)
        return replace(self.subset(idx), a=a[idx], b=b[idx])

    def split_cameras(self, val_fraction: float, seed: int) -> Tuple["RayDataset", "RayDataset"]:
        """
        Hold out round(val_fraction * n_cameras) whole cameras (at least one
        when val_fraction > 0 and there are two or more cameras), chosen by a
        seeded permutation. With nothing held out, validation reuses the
        training rays.
        """
        cams = np.unique(self.camera_index)
        n_val = int(round(val_fraction * cams.size))
        if val_fraction > 0 and cams.size >= 2:
            n_val = min(max(n_val, 1), cams.size - 1)
        else:
            n_val = 0
        if n_val == 0:
            return self, self
        held_out = np.random.default_rng(seed).permutation(cams)[:n_val]
        is_val = np.isin(self.camera_index, held_out)
        return self.subset(np.flatnonzero(~is_val)), self.subset(np.flatnonzero(is_val))

    def head(self, n: int, seed: int) -> "RayDataset":
        """A fixed seeded subset of at most n rays, kept in id order."""
        if len(self) <= n:
            return self
        idx = np.sort(np.random.default_rng(seed).permutation(len(self))[:n])
        return self.subset(idx)

    def batch(self, idx: np.ndarray) -> RayBatch:
        return RayBatch(
            ray_ids=self.ray_ids[idx],
            origins=self.origins[idx],
            dirs=self.dirs[idx],
            colors=self.colors[idx],
            a=None if self.a is None else self.a[idx],
            b=None if self.b is None else self.b[idx],
        )

    def sample(self, rng: np.random.Generator, n: int) -> RayBatch:
        """n rays drawn without replacement (with replacement when n > len)."""
        if len(self) == 0:
            raise InvalidCount("cannot sample from an empty ray dataset")
        idx = rng.choice(len(self), size=n, replace=len(self) < n)
        return self.batch(idx)


def _shared_shape(cameras: Sequence[Camera]) -> Tuple[int, int]:
    shapes = {(cam.height, cam.width) for cam in cameras}
    if len(shapes) != 1:
        raise CameraManifestError(f"cameras must share one resolution, got {sorted(shapes)}")
    return shapes.pop()


__all__ = ["RayBatch", "RayDataset"]
