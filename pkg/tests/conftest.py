from __future__ import annotations

import numpy as np
import pytest

from src.field.scene import DEFAULT_BOUNDS, preset_scene
from src.geometry.camera import orbit_cameras
from src.nn.networks import Architecture
from src.training.config import TrainConfig

TINY_ARCH = Architecture(width=16, depth=3, skip_layer=2, pos_freqs=2, dir_freqs=1)


@pytest.fixture
def bounds():
    return DEFAULT_BOUNDS


@pytest.fixture
def ball_scene():
    return preset_scene("ball")


@pytest.fixture
def shell_scene():
    return preset_scene("shell")


@pytest.fixture
def small_cameras():
    return orbit_cameras(4, width=8, height=8)


@pytest.fixture
def tiny_arch():
    return TINY_ARCH


@pytest.fixture
def tiny_config():
    return TrainConfig(
        batch_rays=16,
        color_iters=4,
        sampler_iters=4,
        joint_iters=4,
        adapt_iters=4,
        n_coarse=8,
        n_fine=8,
        n_pred=8,
        n_uniform=4,
        adapt_samples=8,
        n_bins=7,
        label_kernel=3,
        val_every=2,
        val_rays=32,
        val_fraction=0.25,
        net_width=16,
        net_depth=3,
        net_skip=2,
        pos_freqs=2,
        dir_freqs=1,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)
