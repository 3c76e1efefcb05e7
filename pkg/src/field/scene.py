from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Literal, Sequence, Tuple

import numpy as np

from ..errors import SceneParseError, UnknownPreset
from ..geometry.rays import SceneBounds
from .base import FieldSample

Shape = Literal["gaussian_shell", "solid_ball", "box"]
SHAPES: Tuple[str, ...] = ("gaussian_shell", "solid_ball", "box")

# gaussian_shell thickness as a fraction of its radius (the file format has
# a single scale column).
SHELL_WIDTH_RATIO = 0.1


@dataclass(frozen=True)
class Primitive:
    """
    One analytic volume primitive.

    scale is the radius (shell, ball) or half side length (box); peak is the
    density at the shell radius or inside the solid.
    """

    shape: Shape
    center: Tuple[float, float, float]
    scale: float
    peak: float
    color: Tuple[float, float, float]
    tint: bool = False

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not (math.isfinite(self.peak) and self.peak >= 0):
            raise ValueError(f"peak density must be finite and >= 0, got {self.peak}")
        if any(not 0.0 <= c <= 1.0 for c in self.color):
            raise ValueError(f"base color must lie in [0, 1], got {self.color}")

    @property
    def extent(self) -> float:
        if self.shape == "box":
            return self.scale * math.sqrt(3.0)
        if self.shape == "gaussian_shell":
            return self.scale * (1.0 + SHELL_WIDTH_RATIO)
        return self.scale

    def density(self, rel: np.ndarray) -> np.ndarray:
        """Density at offsets rel (N, 3) from the primitive center."""
        if self.shape == "gaussian_shell":
            width = SHELL_WIDTH_RATIO * self.scale
            r = np.linalg.norm(rel, axis=-1)
            return self.peak * np.exp(-0.5 * ((r - self.scale) / width) ** 2)
        if self.shape == "solid_ball":
            return np.where(np.linalg.norm(rel, axis=-1) <= self.scale, self.peak, 0.0)
        return np.where(np.max(np.abs(rel), axis=-1) <= self.scale, self.peak, 0.0)

    def normal(self, rel: np.ndarray) -> np.ndarray:
        """Outward unit normal at offsets rel (N, 3); zero at the center."""
        if self.shape == "box":
            axis = np.argmax(np.abs(rel), axis=-1)
            n = np.zeros_like(rel)
            rows = np.arange(rel.shape[0])
            n[rows, axis] = np.sign(rel[rows, axis])
            return n
        r = np.linalg.norm(rel, axis=-1, keepdims=True)
        return np.divide(rel, r, out=np.zeros_like(rel), where=r > 0)


@dataclass(frozen=True)
class AnalyticScene:
    """
    Immutable analytic density/color field used as ground truth.

    Densities of overlapping primitives add; color is the density-weighted
    average of primitive colors, each optionally tinted by
    0.5 + 0.5 * max(0, d . n).
    """

    primitives: Tuple[Primitive, ...]
    bounds: SceneBounds
    network_label: str = "field"

    def __post_init__(self) -> None:
        object.__setattr__(self, "primitives", tuple(self.primitives))
        center = self.bounds.center_array
        for idx, prim in enumerate(self.primitives):
            offset = float(np.linalg.norm(np.asarray(prim.center) - center))
            if offset + prim.extent > self.bounds.radius + 1e-9:
                raise ValueError(f"primitive {idx} ({prim.shape}) extends outside the bounds sphere")

    def query(self, points: np.ndarray, dirs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
        sigma = np.zeros(points.shape[0])
        weighted = np.zeros((points.shape[0], 3))

        for prim in self.primitives:
            rel = points - np.asarray(prim.center)
            dens = prim.density(rel)
            color = np.broadcast_to(np.asarray(prim.color), rel.shape)
            if prim.tint:
                facing = np.clip(np.sum(dirs * prim.normal(rel), axis=-1), 0.0, None)
                color = color * (0.5 + 0.5 * facing)[:, None]
            sigma += dens
            weighted += dens[:, None] * color

        inside = np.linalg.norm(points - self.bounds.center_array, axis=-1) <= self.bounds.radius
        sigma = np.where(inside, sigma, 0.0)
        rgb = np.divide(weighted, sigma[:, None], out=np.zeros_like(weighted), where=sigma[:, None] > 0)
        return rgb, sigma

    # ------------------------------------------------------------------ #
    # Edits (geometry-preserving unless stated)
    # ------------------------------------------------------------------ #
    def recolor(self, color: Sequence[float], index: int | None = None) -> "AnalyticScene":
        """Replace the base color of one primitive (or all when index is None)."""
        prims = [
            replace(p, color=tuple(float(c) for c in color)) if index is None or i == index else p
            for i, p in enumerate(self.primitives)
        ]
        return replace(self, primitives=tuple(prims))

    def with_tint(self, tint: bool = True) -> "AnalyticScene":
        return replace(self, primitives=tuple(replace(p, tint=tint) for p in self.primitives))

    def with_primitive(self, prim: Primitive) -> "AnalyticScene":
        """Add geometry; used by the false-negative recovery experiment."""
        return replace(self, primitives=self.primitives + (prim,))


def eval_field(scene: AnalyticScene, x: Sequence[float], d: Sequence[float]) -> FieldSample:
    rgb, sigma = scene.query(np.asarray(x, dtype=np.float64)[None], np.asarray(d, dtype=np.float64)[None])
    return FieldSample(color=rgb[0], density=float(sigma[0]))


# --------------------------------------------------------------------------- #
# Presets
# --------------------------------------------------------------------------- #

DEFAULT_BOUNDS = SceneBounds(center=(0.0, 0.0, 0.0), radius=1.8, segment_length=4.0, near=2.0, far=6.0)

PRESETS: Dict[str, Tuple[Primitive, ...]] = {
    "ball": (
        Primitive("solid_ball", (0.0, 0.0, 0.0), 1.0, 50.0, (1.0, 0.0, 0.0)),
    ),
    "wall": (
        Primitive("box", (0.0, 0.0, 0.0), 0.6, 50.0, (0.1, 0.8, 0.2)),
    ),
    "shell": (
        Primitive("gaussian_shell", (0.0, 0.0, 0.0), 1.0, 10.0, (0.2, 0.3, 0.9), tint=True),
    ),
    # Multi-layer stand-in: a faint enclosure around an opaque core.
    "two_shell": (
        Primitive("gaussian_shell", (0.0, 0.0, 0.0), 1.2, 3.0, (0.6, 0.8, 1.0)),
        Primitive("solid_ball", (0.0, 0.0, 0.0), 0.5, 30.0, (1.0, 0.5, 0.1), tint=True),
    ),
}


def preset_scene(name: str, bounds: SceneBounds = DEFAULT_BOUNDS) -> AnalyticScene:
    try:
        prims = PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown scene preset {name!r}; choose from {sorted(PRESETS)}") from None
    return AnalyticScene(primitives=prims, bounds=bounds)


# --------------------------------------------------------------------------- #
# Scene description file
# --------------------------------------------------------------------------- #

def parse_scene(text: str) -> AnalyticScene:
    """
    Parse a scene description.

    First non-comment line: `cx cy cz radius ell near far`.
    Then one primitive per line: `shape cx cy cz scale peak r g b tint_flag`.
    """
    bounds: SceneBounds | None = None
    prims = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if bounds is None:
            if len(tokens) != 7:
                raise SceneParseError(line_no, f"bounds header needs 7 numbers, got {len(tokens)}")
            try:
                cx, cy, cz, radius, ell, near, far = (float(t) for t in tokens)
                bounds = SceneBounds(center=(cx, cy, cz), radius=radius, segment_length=ell, near=near, far=far)
            except ValueError as exc:
                raise SceneParseError(line_no, str(exc)) from exc
            continue

        if tokens[0] not in SHAPES:
            raise SceneParseError(line_no, f"unknown shape {tokens[0]!r}")
        if len(tokens) != 10:
            raise SceneParseError(line_no, f"primitive needs 10 fields, got {len(tokens)}")
        try:
            values = [float(t) for t in tokens[1:9]]
            tint_flag = int(tokens[9])
            if tint_flag not in (0, 1):
                raise ValueError(f"tint_flag must be 0 or 1, got {tint_flag}")
            prims.append(
                Primitive(
                    shape=tokens[0],  # type: ignore[arg-type]
                    center=(values[0], values[1], values[2]),
                    scale=values[3],
                    peak=values[4],
                    color=(values[5], values[6], values[7]),
                    tint=bool(tint_flag),
                )
            )
        except ValueError as exc:
            raise SceneParseError(line_no, str(exc)) from exc

    if bounds is None:
        raise SceneParseError(0, "missing bounds header")
    try:
        return AnalyticScene(primitives=tuple(prims), bounds=bounds)
    except ValueError as exc:
        raise SceneParseError(0, str(exc)) from exc


def load_scene(path: str | Path) -> AnalyticScene:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise SceneParseError(0, f"{path} is not UTF-8 text ({exc.reason} at byte {exc.start})") from exc
    return parse_scene(text)


def format_scene(scene: AnalyticScene) -> str:
    b = scene.bounds
    lines = [
        "# cx cy cz radius ell near far",
        " ".join(repr(v) for v in (*b.center, b.radius, b.segment_length, b.near, b.far)),
        "# shape cx cy cz scale peak r g b tint_flag",
    ]
    for p in scene.primitives:
        fields = [p.shape, *map(repr, p.center), repr(p.scale), repr(p.peak), *map(repr, p.color), str(int(p.tint))]
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def save_scene(path: str | Path, scene: AnalyticScene) -> None:
    Path(path).write_text(format_scene(scene), encoding="utf-8")


__all__ = [
    "AnalyticScene",
    "DEFAULT_BOUNDS",
    "PRESETS",
    "Primitive",
    "SHAPES",
    "eval_field",
    "format_scene",
    "load_scene",
    "parse_scene",
    "preset_scene",
    "save_scene",
]
