from __future__ import annotations

from .adam import AdamState, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .encoding import PositionalEncoding, encode
from .mlp import MlpCache, MlpModel, backward, forward
from .networks import DESK_ARCH, PAPER_ARCH, Architecture, ColorNetwork, SamplingNetwork

__all__ = [
    "AdamState",
    "Architecture",
    "ColorNetwork",
    "DESK_ARCH",
    "MlpCache",
    "MlpModel",
    "PAPER_ARCH",
    "PositionalEncoding",
    "SamplingNetwork",
    "adam_step",
    "backward",
    "encode",
    "forward",
    "load_checkpoint",
    "save_checkpoint",
]
