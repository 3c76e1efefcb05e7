"""
Run configuration for the training regimes.

TrainConfig travels with a run (config file / CLI flags); process-level
knobs such as worker counts stay in src.config.Settings.

Config files are flat ``key=value`` text:

    # comments and blank lines are ignored
    batch_rays=512
    lr_color=5e-5
    supervision=donerf
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import ConfigFileError
from ..geometry.bins import BinMode
from ..geometry.rays import RayParam
from ..nn.networks import PAPER_ARCH, Architecture
from ..supervision.labels import LabelConfig

Supervision = Literal["weights", "donerf"]


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(0, description="Seed of every random draw in the run.")
    batch_rays: int = Field(256, ge=1, description="Rays per optimizer step.")

    # Iteration budgets
    color_iters: int = Field(2000, ge=1, description="Color-network pre-training iterations.")
    sampler_iters: int = Field(2000, ge=1, description="Sampler iterations when sampler_epochs is 0.")
    sampler_epochs: int = Field(0, ge=0, description="Sampler epochs over the depth dataset; overrides sampler_iters when > 0.")
    joint_iters: int = Field(1000, ge=1, description="Alternating fine-tuning iterations (both networks together).")
    adapt_iters: int = Field(500, ge=1, description="Color-only iterations after a scene edit.")

    # Optimizer
    lr_sampler: float = Field(5e-4, gt=0, description="Sampler learning rate.")
    lr_color: float = Field(5e-5, gt=0, description="Color learning rate during joint fine-tuning.")
    lr_color_pretrain: float = Field(5e-4, gt=0, description="Color learning rate for pre-training and adaptation.")
    lr_decay_rate: float = Field(0.1, gt=0, le=1, description="Learning-rate factor reached after lr_decay_steps.")
    lr_decay_steps: int = Field(250_000, ge=1, description="Steps over which lr decays by lr_decay_rate.")

    # Sampling
    n_coarse: int = Field(64, ge=1, description="Coarse samples per ray (coarse_fine).")
    n_fine: int = Field(128, ge=1, description="Fine samples per ray (coarse_fine).")
    n_pred: int = Field(128, ge=0, description="Joint mode: samples drawn from the predicted distribution.")
    n_uniform: int = Field(64, ge=0, description="Joint mode: extra equidistant samples over [near, far].")
    adapt_samples: int = Field(32, ge=1, description="Adaptation: samples drawn from the frozen sampler.")
    adapt_uniform: int = Field(0, ge=0, description="Adaptation: extra equidistant samples.")
    joint_ratio: int = Field(1, ge=1, description="Color steps per sampler step in joint fine-tuning.")
    freeze_sampler: bool = Field(False, description="Joint mode without sampler updates.")

    # Sampler representation
    n_bins: int = Field(31, ge=3, description="Sampler bins per ray.")
    bin_mode: BinMode = Field("centered_log", description="Boundary placement along the segment.")
    ray_param: RayParam = Field("segment", description="Two-point ray representation.")

    # Labels
    supervision: Supervision = Field("weights", description="Sampler labels: recorded weights or single depth.")
    label_kernel: int = Field(9, ge=1, description="Blur kernel size K (odd, 1 = off).")
    label_sigma: float = Field(3.0, gt=0, description="Blur sigma in kernel taps.")
    label_equalize: bool = Field(True, description="Equalize recorded samples before blurring.")
    donerf_kernel: int = Field(5, ge=1, description="Neighbourhood size of the single-depth labels.")
    donerf_z: int = Field(5, ge=1, description="Triangle filter size of the single-depth labels.")

    # Validation
    val_fraction: float = Field(0.1, ge=0, lt=1, description="Share of cameras (or records) held out.")
    val_every: int = Field(100, ge=1, description="Iterations between validations.")
    val_rays: int = Field(1024, ge=1, description="Held-out rays scored per validation.")

    # Architecture
    paper_scale: bool = Field(False, description="8x256 networks with L=10/4 encodings instead of the desk size.")
    net_width: int = Field(128, ge=1, description="Hidden width (desk scale).")
    net_depth: int = Field(4, ge=0, description="Hidden layers (desk scale).")
    net_skip: int = Field(3, ge=0, description="1-based layer taking the skip input; 0 disables it.")
    pos_freqs: int = Field(6, ge=0, description="Position encoding frequencies.")
    dir_freqs: int = Field(2, ge=0, description="Direction encoding frequencies.")

    @model_validator(mode="after")
    def _consistent(self) -> "TrainConfig":
        if self.bin_mode == "centered_log" and self.n_bins % 2 == 0:
            raise ValueError("centered_log bins need an odd n_bins")
        if self.n_pred + self.n_uniform < 1:
            raise ValueError("joint mode needs at least one sample per ray")
        if self.label_kernel % 2 == 0:
            raise ValueError("label_kernel must be odd")
        if self.net_skip != 0 and not 2 <= self.net_skip <= self.net_depth:
            raise ValueError(f"net_skip must be 0 or in [2, {self.net_depth}]")
        return self

    def architecture(self) -> Architecture:
        if self.paper_scale:
            return PAPER_ARCH
        return Architecture(
            width=self.net_width,
            depth=self.net_depth,
            skip_layer=self.net_skip,
            pos_freqs=self.pos_freqs,
            dir_freqs=self.dir_freqs,
        )

    def label_config(self, segment_length: float) -> LabelConfig:
        return LabelConfig(
            kernel_size=self.label_kernel,
            sigma_blur=self.label_sigma,
            segment_length=segment_length,
            equalize=self.label_equalize,
        )

    def adam_kwargs(self, lr: float) -> Dict[str, Any]:
        return {"lr": lr, "decay_rate": self.lr_decay_rate, "decay_steps": self.lr_decay_steps}


def parse_config_text(text: str) -> Dict[str, str]:
    """Raw key -> value strings; malformed lines and unknown keys raise ConfigFileError."""
    known = set(TrainConfig.model_fields)
    values: Dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigFileError(f"line {line_no}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigFileError(f"line {line_no}: unknown config key {key!r}")
        values[key] = value
    return values


def load_config(path: str | Path | None = None, **overrides: Any) -> TrainConfig:
    """
    TrainConfig from an optional key=value file plus keyword overrides.

    Values are coerced by pydantic, so an out-of-range value raises
    pydantic.ValidationError.
    """
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigFileError(f"config file not found: {path}")
        try:
            text = path.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigFileError(f"{path} is not UTF-8 text ({exc.reason} at byte {exc.start})") from exc
        values.update(parse_config_text(text))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig.model_validate(values)


def dump_config(cfg: TrainConfig) -> str:
    """Every field as key=value in declaration order (readable by load_config)."""
    lines = []
    for name in TrainConfig.model_fields:
        value = getattr(cfg, name)
        if isinstance(value, bool):
            value = str(value).lower()
        lines.append(f"{name}={value}")
    return "\n".join(lines) + "\n"


__all__ = ["Supervision", "TrainConfig", "dump_config", "load_config", "parse_config_text"]
