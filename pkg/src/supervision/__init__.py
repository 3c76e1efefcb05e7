from __future__ import annotations

from .depth_dataset import DepthArrays, DepthRecord, read_depth_dataset, stack_records, write_depth_dataset
from .donerf import depth_from_weights, donerf_blur_filter, donerf_classify, donerf_labels
from .labels import (
    LabelConfig,
    equalize_samples,
    gaussian_blur_weights,
    make_labels,
    make_labels_batch,
    max_resample,
    normalize,
)

__all__ = [
    "DepthArrays",
    "DepthRecord",
    "LabelConfig",
    "depth_from_weights",
    "donerf_blur_filter",
    "donerf_classify",
    "donerf_labels",
    "equalize_samples",
    "gaussian_blur_weights",
    "make_labels",
    "make_labels_batch",
    "max_resample",
    "normalize",
    "read_depth_dataset",
    "stack_records",
    "write_depth_dataset",
]
