"""
Training: run configuration, ray datasets, the training regimes and their
CSV metric logs.
"""

from __future__ import annotations

from .config import TrainConfig, dump_config, load_config
from .data import RayBatch, RayDataset
from .metric_log import MetricLog, MetricRow, read_metric_log
from .trainer import (
    ColorModels,
    TrainResult,
    adapt_to_edit,
    build_depth_dataset,
    finetune_joint,
    sampler_labels,
    train_color,
    train_sampler,
)

__all__ = [
    "ColorModels",
    "MetricLog",
    "MetricRow",
    "RayBatch",
    "RayDataset",
    "TrainConfig",
    "TrainResult",
    "adapt_to_edit",
    "build_depth_dataset",
    "dump_config",
    "finetune_joint",
    "load_config",
    "read_metric_log",
    "sampler_labels",
    "train_color",
    "train_sampler",
]
