"""
Prometheus metrics for rendering and training.

These are process-wide observability counters:
- network forward passes by network (color, coarse, sampler, field)
- training steps / divergences by regime
- rays rendered and render latency by path
- CLI invocations by command and exit code

Exact per-call accounting lives in RenderStats and the training metric
logs; these counters only mirror it. The CLI dumps them with
write_textfile() next to its outputs.
"""

from __future__ import annotations

from pathlib import Path

from prometheus_client import REGISTRY, Counter, Histogram, write_to_textfile

FORWARD_PASSES = Counter(
    "terminerf_network_forward_passes_total",
    "Number of per-point (color/field) or per-ray (sampler) network evaluations",
    labelnames=("network",),  # color | coarse | sampler | field
)

TRAIN_STEPS = Counter(
    "terminerf_train_steps_total",
    "Number of optimizer steps taken",
    labelnames=("regime",),  # color | sampler | joint_color | joint_sampler | adapt
)

TRAIN_DIVERGENCE = Counter(
    "terminerf_train_divergence_total",
    "Number of training runs aborted on a non-finite loss",
    labelnames=("regime",),
)

RAYS_RENDERED = Counter(
    "terminerf_rays_rendered_total",
    "Number of rays rendered",
    labelnames=("path",),  # oracle_dense | coarse_fine | terminerf
)

RENDER_DURATION = Histogram(
    "terminerf_render_duration_seconds",
    "Wall time of render_image calls in seconds",
    labelnames=("path",),
)

CLI_COMMANDS = Counter(
    "terminerf_cli_commands_total",
    "Number of CLI command invocations",
    labelnames=("command", "exit_code"),
)


def write_textfile(out_dir: Path) -> Path:
    """
    Write the default registry in Prometheus text format to out_dir/metrics.prom.
    """
    path = Path(out_dir) / "metrics.prom"
    write_to_textfile(str(path), REGISTRY)
    return path
