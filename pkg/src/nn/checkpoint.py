"""
Binary checkpoint files.

Layout (little-endian):

    magic        8 bytes   b"TNRFCKPT"
    version      u8        1
    meta_len     u32       length of the JSON metadata block
    meta         bytes     UTF-8 JSON: network kind + architecture
    n_layers     u32
    per layer    u32 rows, u32 cols, rows*cols f32 (row-major), cols f32 bias
    has_adam     u8
    adam         u64 step, u64 decay_steps, 5 x f64 (lr, beta1, beta2, eps,
                 decay_rate), then the first and second moments of every
                 parameter as f32 in parameter order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import BinaryIO, List, Tuple, Union

import numpy as np
import structlog

from ..errors import CheckpointFormatError
from .adam import AdamState
from .mlp import MlpModel
from .networks import ColorNetwork, SamplingNetwork

logger = structlog.get_logger("nn.checkpoint")

MAGIC = b"TNRFCKPT"
VERSION = 1

Network = Union[ColorNetwork, SamplingNetwork]


def _write_array(fh: BinaryIO, arr: np.ndarray) -> None:
    fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointFormatError("checkpoint truncated")
    return data


def _read_array(fh: BinaryIO, shape: Tuple[int, ...]) -> np.ndarray:
    count = int(np.prod(shape))
    return np.frombuffer(_read_exact(fh, 4 * count), dtype="<f4").reshape(shape).astype(np.float32)


def save_checkpoint(path: str | Path, network: Network, adam: AdamState | None = None) -> None:
    mlp = network.mlp
    meta = network.metadata()
    meta["mlp"] = {
        "input_dim": mlp.input_dim,
        "output_dim": mlp.output_dim,
        "width": mlp.width,
        "depth": mlp.depth,
        "skip_layer": mlp.skip_layer,
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BI", VERSION, len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(struct.pack("<I", len(mlp.weights)))
        for w, b in zip(mlp.weights, mlp.biases):
            fh.write(struct.pack("<II", *w.shape))
            _write_array(fh, w)
            _write_array(fh, b)

        if adam is None or not adam.m:
            fh.write(struct.pack("<B", 0))
        else:
            fh.write(struct.pack("<B", 1))
            fh.write(struct.pack("<QQ", adam.step, adam.decay_steps))
            fh.write(struct.pack("<5d", adam.lr, adam.beta1, adam.beta2, adam.eps, adam.decay_rate))
            for moment in (*adam.m, *adam.v):
                _write_array(fh, moment)

    logger.info("checkpoint_saved", path=str(path), kind=meta["kind"], has_adam=adam is not None)


def load_checkpoint(path: str | Path) -> Tuple[Network, AdamState | None]:
    """Restore a network (and its optimizer state when stored)."""
    path = Path(path)
    if not path.exists():
        raise CheckpointFormatError(f"checkpoint not found: {path}")

    with path.open("rb") as fh:
        if _read_exact(fh, len(MAGIC)) != MAGIC:
            raise CheckpointFormatError(f"{path} is not a checkpoint (bad magic)")
        version, meta_len = struct.unpack("<BI", _read_exact(fh, 5))
        if version != VERSION:
            raise CheckpointFormatError(f"unsupported checkpoint version {version}")
        try:
            meta = json.loads(_read_exact(fh, meta_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointFormatError(f"corrupt metadata block: {exc}") from exc

        (n_layers,) = struct.unpack("<I", _read_exact(fh, 4))
        weights: List[np.ndarray] = []
        biases: List[np.ndarray] = []
        for _ in range(n_layers):
            rows, cols = struct.unpack("<II", _read_exact(fh, 8))
            weights.append(_read_array(fh, (rows, cols)))
            biases.append(_read_array(fh, (cols,)))

        arch = meta.get("mlp", {})
        try:
            mlp = MlpModel(
                input_dim=arch["input_dim"],
                output_dim=arch["output_dim"],
                width=arch["width"],
                depth=arch["depth"],
                skip_layer=arch["skip_layer"],
                weights=weights,
                biases=biases,
            )
        except KeyError as exc:
            raise CheckpointFormatError(f"metadata lacks {exc}") from exc
        if len(weights) != mlp.depth + 1:
            raise CheckpointFormatError(f"{len(weights)} layers stored for depth {mlp.depth}")

        adam: AdamState | None = None
        (has_adam,) = struct.unpack("<B", _read_exact(fh, 1))
        if has_adam:
            step, decay_steps = struct.unpack("<QQ", _read_exact(fh, 16))
            lr, beta1, beta2, eps, decay_rate = struct.unpack("<5d", _read_exact(fh, 40))
            params = mlp.parameters()
            moments = [_read_array(fh, p.shape) for p in params] + [_read_array(fh, p.shape) for p in params]
            adam = AdamState(
                lr=lr,
                beta1=beta1,
                beta2=beta2,
                eps=eps,
                decay_rate=decay_rate,
                decay_steps=decay_steps,
                step=step,
                m=moments[: len(params)],
                v=moments[len(params):],
            )

    kind = meta.get("kind")
    if kind == "color":
        network: Network = ColorNetwork.from_metadata(meta, mlp)
    elif kind == "sampler":
        network = SamplingNetwork.from_metadata(meta, mlp)
    else:
        raise CheckpointFormatError(f"unknown network kind {kind!r}")
    return network, adam


__all__ = ["MAGIC", "VERSION", "load_checkpoint", "save_checkpoint"]
