"""
Append-only CSV training log.

Columns: iteration, wall_ms, loss, val_psnr, forward_passes_cum. Rows are
written as they happen; iterations must strictly increase. Numbers are
formatted with fixed precision so reruns with the same seed produce
identical files (wall_ms stays 0 unless wall-time recording is on).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import IO, List

from ..errors import IncompatibleLogs

COLUMNS = ("iteration", "wall_ms", "loss", "val_psnr", "forward_passes_cum")


@dataclass(frozen=True)
class MetricRow:
    iteration: int
    wall_ms: float
    loss: float | None
    val_psnr: float | None
    forward_passes_cum: int

    def as_csv(self) -> List[str]:
        return [
            str(self.iteration),
            f"{self.wall_ms:.3f}",
            "" if self.loss is None else f"{self.loss:.8e}",
            "" if self.val_psnr is None else f"{self.val_psnr:.4f}",
            str(self.forward_passes_cum),
        ]


class MetricLog:
    """In-memory rows, mirrored to a CSV file when a path is given."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.rows: List[MetricRow] = []
        self._fh: IO[str] | None = None
        self._writer = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self.path.open("w", newline="", encoding="utf-8")
            self._writer = csv.writer(self._fh, lineterminator="\n")
            self._writer.writerow(COLUMNS)

    def append(self, row: MetricRow) -> None:
        if self.rows and row.iteration <= self.rows[-1].iteration:
            raise ValueError(f"iteration {row.iteration} after {self.rows[-1].iteration}")
        self.rows.append(row)
        if self._writer is not None:
            self._writer.writerow(row.as_csv())
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None
            self._writer = None

    def __enter__(self) -> "MetricLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _opt_float(text: str) -> float | None:
    return float(text) if text else None


def read_metric_log(path: str | Path) -> List[MetricRow]:
    path = Path(path)
    if not path.exists():
        raise IncompatibleLogs(f"metric log not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise IncompatibleLogs(f"{path}: expected columns {','.join(COLUMNS)}")
        return [
            MetricRow(
                iteration=int(rec["iteration"]),
                wall_ms=float(rec["wall_ms"]),
                loss=_opt_float(rec["loss"]),
                val_psnr=_opt_float(rec["val_psnr"]),
                forward_passes_cum=int(rec["forward_passes_cum"]),
            )
            for rec in reader
        ]


__all__ = ["COLUMNS", "MetricLog", "MetricRow", "read_metric_log"]
