"""
Volume rendering maths and sampling.

The render paths live in src.rendering.renderer and are imported from there
directly; that module depends on src.field and src.supervision, which in
turn use the primitives re-exported here.
"""

from __future__ import annotations

from .distribution import WeightDistribution
from .sampling import normalize_rows, sample_from_bins, sample_from_bins_batch
from .volume import composite_color, composite_rays, composite_rays_backward, transmittance_weights

__all__ = [
    "WeightDistribution",
    "composite_color",
    "composite_rays",
    "composite_rays_backward",
    "normalize_rows",
    "sample_from_bins",
    "sample_from_bins_batch",
    "transmittance_weights",
]
