"""
Depth-dataset files: recorded (z, w) termination weights per training ray.

Layout (little-endian):

    magic      8 bytes  b"TNRFDEPT"
    version    u8       1
    n_records  u32
    record     u32 ray_id, 12 x f32 (origin, direction, a, b),
               u32 n, n x f32 z, n x f32 w
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List

import numpy as np
import structlog

from ..errors import DepthDatasetFormatError

logger = structlog.get_logger("supervision.depth_dataset")

MAGIC = b"TNRFDEPT"
VERSION = 1


@dataclass(frozen=True, eq=False)
class DepthRecord:
    ray_id: int
    origin: np.ndarray
    direction: np.ndarray
    a: np.ndarray
    b: np.ndarray
    z: np.ndarray
    w: np.ndarray

    def __post_init__(self) -> None:
        if np.shape(self.z) != np.shape(self.w):
            raise DepthDatasetFormatError(f"ray {self.ray_id}: z and w lengths differ")


@dataclass(frozen=True, eq=False)
class DepthArrays:
    """Records stacked into arrays (all records share one tuple count)."""

    ray_ids: np.ndarray  # (R,)
    origins: np.ndarray  # (R, 3)
    dirs: np.ndarray  # (R, 3)
    a: np.ndarray  # (R, 3)
    b: np.ndarray  # (R, 3)
    z: np.ndarray  # (R, S)
    w: np.ndarray  # (R, S)

    def __len__(self) -> int:
        return int(self.ray_ids.size)

    def take(self, idx: np.ndarray) -> "DepthArrays":
        return DepthArrays(
            ray_ids=self.ray_ids[idx],
            origins=self.origins[idx],
            dirs=self.dirs[idx],
            a=self.a[idx],
            b=self.b[idx],
            z=self.z[idx],
            w=self.w[idx],
        )


def write_depth_dataset(path: str | Path, records: Iterable[DepthRecord]) -> int:
    records = list(records)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BI", VERSION, len(records)))
        for rec in records:
            fh.write(struct.pack("<I", rec.ray_id))
            head = np.concatenate([rec.origin, rec.direction, rec.a, rec.b]).astype("<f4")
            fh.write(head.tobytes())
            z = np.asarray(rec.z, dtype="<f4")
            fh.write(struct.pack("<I", z.size))
            fh.write(z.tobytes())
            fh.write(np.asarray(rec.w, dtype="<f4").tobytes())
    logger.info("depth_dataset_written", path=str(path), records=len(records))
    return len(records)


def _take(data: memoryview, offset: int, n: int) -> bytes:
    if offset + n > len(data):
        raise DepthDatasetFormatError("depth dataset truncated")
    return bytes(data[offset : offset + n])


def read_depth_dataset(path: str | Path) -> List[DepthRecord]:
    path = Path(path)
    if not path.exists():
        raise DepthDatasetFormatError(f"depth dataset not found: {path}")
    data = memoryview(path.read_bytes())
    if _take(data, 0, len(MAGIC)) != MAGIC:
        raise DepthDatasetFormatError(f"{path} is not a depth dataset (bad magic)")
    version, count = struct.unpack("<BI", _take(data, 8, 5))
    if version != VERSION:
        raise DepthDatasetFormatError(f"unsupported depth dataset version {version}")

    offset = 13
    records: List[DepthRecord] = []
    for _ in range(count):
        (ray_id,) = struct.unpack("<I", _take(data, offset, 4))
        head = np.frombuffer(_take(data, offset + 4, 48), dtype="<f4").astype(np.float64)
        (n,) = struct.unpack("<I", _take(data, offset + 52, 4))
        offset += 56
        z = np.frombuffer(_take(data, offset, 4 * n), dtype="<f4").astype(np.float64)
        w = np.frombuffer(_take(data, offset + 4 * n, 4 * n), dtype="<f4").astype(np.float64)
        offset += 8 * n
        records.append(DepthRecord(ray_id, head[0:3], head[3:6], head[6:9], head[9:12], z, w))
    if offset != len(data):
        raise DepthDatasetFormatError(f"{len(data) - offset} trailing bytes after {count} records")
    return records


def stack_records(records: List[DepthRecord]) -> DepthArrays:
    if not records:
        raise DepthDatasetFormatError("depth dataset has no records")
    lengths = {rec.z.size for rec in records}
    if len(lengths) != 1:
        raise DepthDatasetFormatError(f"records have differing tuple counts {sorted(lengths)}")
    return DepthArrays(
        ray_ids=np.array([rec.ray_id for rec in records], dtype=np.int64),
        origins=np.stack([rec.origin for rec in records]),
        dirs=np.stack([rec.direction for rec in records]),
        a=np.stack([rec.a for rec in records]),
        b=np.stack([rec.b for rec in records]),
        z=np.stack([rec.z for rec in records]),
        w=np.stack([rec.w for rec in records]),
    )


__all__ = [
    "DepthArrays",
    "DepthRecord",
    "MAGIC",
    "VERSION",
    "read_depth_dataset",
    "stack_records",
    "write_depth_dataset",
]
