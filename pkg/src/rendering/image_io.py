"""
Image buffers and their file formats.

PNG is 8-bit sRGB-agnostic (values are written as-is, rounded from [0, 1]).
PFM is the portable float map: header "PF", "<W> <H>", a scale whose sign
gives the byte order (negative = little-endian), then float32 RGB rows
stored bottom-to-top.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DimensionMismatch, MissingReference


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """H x W x 3 float image with channels in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels, dtype=np.float32)
        if pixels.ndim != 3 or pixels.shape[-1] != 3:
            raise DimensionMismatch(f"expected an (H, W, 3) image, got {pixels.shape}")
        object.__setattr__(self, "pixels", np.clip(pixels, 0.0, 1.0))

    @classmethod
    def from_rays(cls, colors: np.ndarray, height: int, width: int) -> "ImageBuffer":
        """Row-major per-pixel colors (H*W, 3) -> image."""
        return cls(np.asarray(colors).reshape(height, width, 3))

    @classmethod
    def filled(cls, height: int, width: int, color) -> "ImageBuffer":
        return cls(np.broadcast_to(np.asarray(color, dtype=np.float32), (height, width, 3)))

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def shape(self) -> tuple:
        return self.pixels.shape


def write_png(path: str | Path, image: ImageBuffer) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.round(image.pixels * 255.0).astype(np.uint8)
    Image.fromarray(data).save(path, format="PNG")
    return path


def read_png(path: str | Path) -> ImageBuffer:
    path = Path(path)
    if not path.exists():
        raise MissingReference(f"reference image not found: {path}")
    with Image.open(path) as img:
        data = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return ImageBuffer(data)


def write_pfm(path: str | Path, image: ImageBuffer) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = f"PF\n{image.width} {image.height}\n-1.0\n".encode("ascii")
    body = np.ascontiguousarray(image.pixels[::-1], dtype="<f4").tobytes()
    path.write_bytes(header + body)
    return path


def read_pfm(path: str | Path) -> ImageBuffer:
    path = Path(path)
    if not path.exists():
        raise MissingReference(f"reference image not found: {path}")
    raw = path.read_bytes()
    parts = raw.split(b"\n", 3)
    if len(parts) < 4 or parts[0].strip() not in (b"PF", b"Pf"):
        raise DimensionMismatch(f"{path} is not a PFM file")
    channels = 3 if parts[0].strip() == b"PF" else 1
    try:
        width, height = (int(v) for v in parts[1].split())
        scale = float(parts[2])
    except ValueError as exc:
        raise DimensionMismatch(f"{path}: bad PFM header ({exc})") from exc

    dtype = "<f4" if scale < 0 else ">f4"
    count = width * height * channels
    data = np.frombuffer(parts[3], dtype=dtype, count=count) if len(parts[3]) >= 4 * count else None
    if data is None:
        raise DimensionMismatch(f"{path}: PFM payload shorter than {width}x{height}x{channels}")
    pixels = data.reshape(height, width, channels)[::-1].astype(np.float32)
    if channels == 1:
        pixels = np.repeat(pixels, 3, axis=-1)
    return ImageBuffer(pixels)


def read_image(path: str | Path) -> ImageBuffer:
    """Dispatch on suffix: .pfm or anything Pillow opens."""
    path = Path(path)
    return read_pfm(path) if path.suffix.lower() == ".pfm" else read_png(path)


PSNR_CAP = 99.0


def psnr_from_mse(mse: float, cap: float = PSNR_CAP) -> float:
    """10 log10(1 / mse) in dB for unit-range signals; capped when mse is 0."""
    if mse <= 0:
        return cap
    return float(min(cap, -10.0 * np.log10(mse)))


__all__ = ["ImageBuffer", "PSNR_CAP", "psnr_from_mse", "read_image", "read_pfm", "read_png", "write_pfm", "write_png"]
