"""
Image metrics and the eval / compare tables.

eval renders every camera with the coarse_fine 64+128 reference, a
pass-matched coarse_fine baseline (n/4 + n/2) and the terminerf path with
n samples, for each requested n. Speedup is reference passes per ray over
method passes per ray; wall time is reported next to it (0 unless
wall-time recording is on).

compare cross-tabulates several eval tables: sample count x representation
-> terminerf PSNR.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import structlog

from ..config import Settings, get_settings
from ..errors import DimensionMismatch, IncompatibleLogs, MissingReference
from ..geometry.camera import Camera
from ..nn.networks import SamplingNetwork
from ..rendering.image_io import ImageBuffer, psnr_from_mse, read_image
from ..rendering.renderer import RenderConfig, RenderModels, RenderStats, render_image
from ..training.trainer import ColorModels

logger = structlog.get_logger("cli.evaluation")

REFERENCE = (64, 128)


def psnr(img_a: ImageBuffer, img_b: ImageBuffer) -> float:
    """PSNR in dB over all pixels and channels; identical images give the 99 dB cap."""
    if img_a.shape != img_b.shape:
        raise DimensionMismatch(f"cannot compare {img_a.shape} with {img_b.shape}")
    diff = img_a.pixels.astype(np.float64) - img_b.pixels.astype(np.float64)
    return psnr_from_mse(float(np.mean(diff**2)))


def load_references(ref_dir: str | Path, cameras: Sequence[Camera]) -> List[ImageBuffer]:
    """<frame>.pfm, falling back to <frame>.png, for every camera."""
    ref_dir = Path(ref_dir)
    images = []
    for cam in cameras:
        candidates = [ref_dir / f"{cam.name}.pfm", ref_dir / f"{cam.name}.png"]
        found = next((p for p in candidates if p.exists()), None)
        if found is None:
            raise MissingReference(f"no reference image for {cam.name} in {ref_dir}")
        images.append(read_image(found))
    return images


@dataclass(frozen=True)
class EvalRow:
    method: str
    representation: str
    samples: str
    psnr: float
    passes_per_ray: float
    speedup: float
    wall_ms: float

    def formatted(self) -> List[str]:
        return [
            self.method,
            self.representation,
            self.samples,
            f"{self.psnr:.4f}",
            f"{self.passes_per_ray:.2f}",
            f"{self.speedup:.2f}",
            f"{self.wall_ms:.1f}",
        ]


EVAL_COLUMNS = tuple(f.name for f in fields(EvalRow))


def _score(
    models: RenderModels,
    cameras: Sequence[Camera],
    references: Sequence[ImageBuffer],
    cfg: RenderConfig,
    settings: Settings,
) -> Tuple[float, RenderStats]:
    scores = []
    total = RenderStats()
    for cam, ref in zip(cameras, references):
        image, stats = render_image(models, cam, cfg, settings=settings)
        scores.append(psnr(image, ref))
        total = total + stats
    return float(np.mean(scores)), total


def eval_command(
    color: ColorModels,
    sampler: SamplingNetwork | None,
    cameras: Sequence[Camera],
    references: Sequence[ImageBuffer],
    sample_counts: Sequence[int],
    *,
    seed: int = 0,
    representation: str | None = None,
    background: Tuple[float, float, float] = (1.0, 1.0, 1.0),
    settings: Settings | None = None,
) -> List[EvalRow]:
    settings = settings or get_settings()
    if len(cameras) != len(references):
        raise MissingReference(f"{len(cameras)} cameras but {len(references)} reference images")
    if sampler is not None and representation is None:
        representation = f"{sampler.form}+{sampler.mode}"
    models = color.render_models(sampler)
    log = logger.bind(cameras=len(cameras), sample_counts=list(sample_counts))
    log.info("eval_start")

    def cf(n_coarse: int, n_fine: int) -> RenderConfig:
        return RenderConfig(path="coarse_fine", n_coarse=n_coarse, n_fine=n_fine, seed=seed, background=background)

    ref_psnr, ref_stats = _score(models, cameras, references, cf(*REFERENCE), settings)
    ref_passes = ref_stats.passes_per_ray()
    n_cams = max(len(cameras), 1)

    def row(method: str, rep: str, samples: str, score: float, stats: RenderStats) -> EvalRow:
        passes = stats.passes_per_ray()
        return EvalRow(
            method=method,
            representation=rep,
            samples=samples,
            psnr=score,
            passes_per_ray=passes,
            speedup=ref_passes / passes if passes else 0.0,
            wall_ms=stats.wall_ms / n_cams,
        )

    rows = [row("coarse_fine", "-", f"{REFERENCE[0]}+{REFERENCE[1]}", ref_psnr, ref_stats)]
    for n in sample_counts:
        n_coarse, n_fine = max(n // 4, 1), max(n // 2, 1)
        score, stats = _score(models, cameras, references, cf(n_coarse, n_fine), settings)
        rows.append(row("coarse_fine", "-", f"{n_coarse}+{n_fine}", score, stats))
        if sampler is not None:
            cfg = RenderConfig(path="terminerf", n_samples=n, seed=seed, background=background)
            score, stats = _score(models, cameras, references, cfg, settings)
            rows.append(row("terminerf", representation, str(n), score, stats))

    log.info("eval_end", rows=len(rows), reference_psnr=round(ref_psnr, 4))
    return rows


# --------------------------------------------------------------------------- #
# Tables
# --------------------------------------------------------------------------- #

def format_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Left-aligned text columns separated by two spaces."""
    widths = [len(h) for h in headers]
    for r in rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, r)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in [list(headers), *rows]]
    return "\n".join(lines) + "\n"


def write_csv(path: str | Path, headers: Sequence[str], rows: Sequence[Sequence[str]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(headers)
        writer.writerows(rows)
    return path


def eval_table(rows: Sequence[EvalRow]) -> Tuple[Tuple[str, ...], List[List[str]]]:
    return EVAL_COLUMNS, [r.formatted() for r in rows]


def read_eval_table(path: str | Path) -> List[Dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise IncompatibleLogs(f"eval table not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != EVAL_COLUMNS:
            raise IncompatibleLogs(f"{path} is not an eval table")
        return list(reader)


def compare_command(paths: Sequence[str | Path]) -> Tuple[List[str], List[List[str]]]:
    """
    samples x representation table of terminerf PSNR.

    Every table must cover the same sample counts. Columns are named by
    representation, with a #k suffix when two tables share one.
    """
    if len(paths) < 2:
        raise IncompatibleLogs(f"compare needs at least two eval tables, got {len(paths)}")

    columns: List[str] = []
    grids: List[Dict[str, str]] = []
    for path in paths:
        rows = [r for r in read_eval_table(path) if r["method"] == "terminerf"]
        if not rows:
            raise IncompatibleLogs(f"{path} has no terminerf rows")
        reps = {r["representation"] for r in rows}
        if len(reps) != 1:
            raise IncompatibleLogs(f"{path} mixes representations {sorted(reps)}")
        name = reps.pop()
        if name in columns:
            name = f"{name}#{sum(c.split('#')[0] == name for c in columns) + 1}"
        columns.append(name)
        grids.append({r["samples"]: r["psnr"] for r in rows})

    counts = list(grids[0])
    for path, grid in zip(paths, grids):
        if set(grid) != set(counts):
            raise IncompatibleLogs(f"{path} covers samples {sorted(grid, key=int)}, expected {sorted(counts, key=int)}")
    counts.sort(key=int)
    headers = ["samples", *columns]
    return headers, [[n, *(grid[n] for grid in grids)] for n in counts]


__all__ = [
    "EVAL_COLUMNS",
    "EvalRow",
    "compare_command",
    "eval_command",
    "eval_table",
    "format_table",
    "load_references",
    "psnr",
    "read_eval_table",
    "write_csv",
]
