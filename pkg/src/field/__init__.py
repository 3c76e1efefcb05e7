from __future__ import annotations

from .base import FieldSample, RadianceField
from .oracle import DENSE_BINS, dense_grid, dense_samples, oracle_weights
from .scene import (
    DEFAULT_BOUNDS,
    PRESETS,
    AnalyticScene,
    Primitive,
    eval_field,
    format_scene,
    load_scene,
    parse_scene,
    preset_scene,
    save_scene,
)

__all__ = [
    "AnalyticScene",
    "DEFAULT_BOUNDS",
    "DENSE_BINS",
    "FieldSample",
    "PRESETS",
    "Primitive",
    "RadianceField",
    "dense_grid",
    "dense_samples",
    "eval_field",
    "format_scene",
    "load_scene",
    "oracle_weights",
    "parse_scene",
    "preset_scene",
    "save_scene",
]
