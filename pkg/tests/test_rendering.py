from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.config import Settings
from src.errors import (
    DegenerateDistribution,
    DimensionMismatch,
    InvalidGrid,
    MissingRandomSource,
    NegativeDensity,
    ShapeMismatch,
    UsageError,
)
from src.geometry.bins import BinGrid
from src.geometry.camera import orbit_cameras
from src.geometry.rays import Ray
from src.rendering.distribution import WeightDistribution
from src.rendering.image_io import (
    PSNR_CAP,
    ImageBuffer,
    psnr_from_mse,
    read_image,
    read_pfm,
    write_pfm,
    write_png,
)
from src.rendering.renderer import (
    OracleSampler,
    RenderConfig,
    RenderModels,
    fine_z,
    render_image,
    render_ray,
    render_rays,
)
from src.rendering.sampling import RayStreams, ray_uniforms, sample_from_bins, stratified_z
from src.rendering.volume import (
    composite_color,
    composite_rays,
    composite_rays_backward,
    deltas_from_z,
    transmittance_weights,
)

densities = st.lists(st.floats(min_value=0.0, max_value=50.0), min_size=1, max_size=24)


@settings(max_examples=60, deadline=None)
@given(sigmas=densities, delta=st.floats(min_value=1e-3, max_value=0.5))
def test_weights_sum_to_opacity(sigmas, delta):
    deltas = np.full(len(sigmas), delta)
    w = transmittance_weights(sigmas, deltas)
    assert np.all(w >= 0) and np.all(w <= 1)
    expected = 1.0 - np.exp(-np.sum(np.asarray(sigmas) * deltas))
    assert w.sum() == pytest.approx(expected, abs=1e-9)


def test_transmittance_rejects_bad_input():
    with pytest.raises(NegativeDensity):
        transmittance_weights([1.0, -0.1], [0.1, 0.1])
    with pytest.raises(ShapeMismatch):
        transmittance_weights([1.0], [0.1, 0.1])


def test_composite_color_blends_background():
    empty = composite_color([0.0, 0.0], [[1, 0, 0], [0, 1, 0]], background=(0.2, 0.4, 0.6))
    np.testing.assert_allclose(empty, [0.2, 0.4, 0.6])
    half = composite_color([0.5], [[1, 0, 0]], background=(0, 0, 0))
    np.testing.assert_allclose(half, [0.5, 0, 0])


def test_deltas_cap_last_interval_at_far():
    np.testing.assert_allclose(deltas_from_z(np.array([2.0, 3.0, 5.5]), 6.0), [1.0, 2.5, 0.5])
    np.testing.assert_allclose(deltas_from_z(np.array([2.0, 6.5]), 6.0), [4.5, 0.0])


def test_composite_backward_matches_finite_differences(rng):
    rgb = rng.uniform(size=(2, 5, 3))
    sigma = rng.uniform(0.1, 3.0, size=(2, 5))
    deltas = rng.uniform(0.05, 0.4, size=(2, 5))
    background = np.array([0.3, 0.6, 0.9])
    g = rng.normal(size=(2, 3))

    def loss() -> float:
        return float(np.sum(composite_rays(rgb, sigma, deltas, background)[0] * g))

    _, _, cache = composite_rays(rgb, sigma, deltas, background)
    d_rgb, d_sigma = composite_rays_backward(cache, g)
    eps = 1e-6
    for arr, grad in ((sigma, d_sigma), (rgb, d_rgb)):
        for index in np.ndindex(*arr.shape[:2]):
            index = index if arr.ndim == 2 else index + (1,)
            old = arr[index]
            arr[index] = old + eps
            up = loss()
            arr[index] = old - eps
            down = loss()
            arr[index] = old
            assert grad[index] == pytest.approx((up - down) / (2 * eps), abs=1e-7)


def test_weight_distribution_validation():
    with pytest.raises(ShapeMismatch):
        WeightDistribution(z=[2.0, 1.0], w=[0.5, 0.5])
    with pytest.raises(ShapeMismatch):
        WeightDistribution(z=[1.0, 2.0], w=[0.5, -0.1])
    assert WeightDistribution(z=[1.0, 2.0], w=[0.25, 0.75]).is_normalized()


# --------------------------------------------------------------------------- #
# Sampling
# --------------------------------------------------------------------------- #

def test_stratified_midpoints():
    z = stratified_z(np.array([2.0]), np.array([6.0]), 4)
    np.testing.assert_allclose(z, [[2.5, 3.5, 4.5, 5.5]])


def test_sample_from_bins_respects_mass():
    grid = BinGrid(boundaries=np.array([2.0, 3.0, 4.0]), open_ended=True)
    z = sample_from_bins(grid, [0.0, 1.0, 0.0], 16, stochastic=False, far=6.0)
    assert z.shape == (16,)
    assert np.all((z >= 3.0) & (z <= 4.0))
    assert np.all(np.diff(z) >= 0)

    z = sample_from_bins(grid, [0.0, 0.0, 1.0], 8, stochastic=True, rng=np.random.default_rng(1), far=6.0)
    assert np.all((z >= 4.0) & (z <= 6.0))


def test_sample_from_bins_errors():
    grid = BinGrid(boundaries=np.array([2.0, 3.0, 4.0]), open_ended=True)
    with pytest.raises(DegenerateDistribution):
        sample_from_bins(grid, [0.0, 0.0, 0.0], 4, stochastic=False, far=6.0)
    with pytest.raises(InvalidGrid):
        sample_from_bins(grid, [1.0, 1.0, 1.0], 4, stochastic=False)
    with pytest.raises(ShapeMismatch):
        sample_from_bins(grid, [1.0, 1.0], 4, stochastic=False, far=6.0)


def test_stochastic_sampling_needs_an_rng():
    grid = BinGrid(boundaries=np.array([2.0, 3.0, 4.0]), open_ended=True)
    with pytest.raises(MissingRandomSource) as info:
        sample_from_bins(grid, [1.0, 1.0, 1.0], 4, stochastic=True, far=6.0)
    assert isinstance(info.value, UsageError)


# chi-square 0.9999 quantile with 6 degrees of freedom
CHI2_CRITICAL_DF6 = 27.86


def test_stochastic_draws_follow_bin_masses():
    grid = BinGrid(boundaries=np.linspace(2.0, 5.0, 7), open_ended=True)
    edges = grid.edges(6.0)
    rng = np.random.default_rng(12)
    n_draws = 10**6
    for k in range(20):
        masses = rng.dirichlet(np.full(grid.n_bins, 2.0)) + 0.01
        masses /= masses.sum()
        z = sample_from_bins(grid, masses, n_draws, stochastic=True, rng=np.random.default_rng([5, k]), far=6.0)
        counts = np.bincount(np.searchsorted(edges, z, side="right") - 1, minlength=grid.n_bins)
        expected = masses * n_draws
        assert counts.sum() == n_draws
        assert np.sum((counts - expected) ** 2 / expected) < CHI2_CRITICAL_DF6


def test_ray_uniforms_do_not_depend_on_batch():
    together = ray_uniforms(3, [5, 6, 7], 4, stream=1)
    alone = ray_uniforms(3, [6], 4, stream=1)
    np.testing.assert_array_equal(together[1], alone[0])
    assert not np.array_equal(ray_uniforms(3, [6], 4, stream=2), alone)


def test_fine_z_is_sorted_union():
    coarse = np.array([[2.0, 3.0, 4.0, 5.0]])
    weights = np.array([[0.0, 1.0, 0.0, 0.0]])
    z = fine_z(coarse, weights, 6.0, 6, RayStreams(0, [0], stochastic=False))
    assert z.shape == (1, 10)
    assert np.all(np.diff(z) >= 0)
    added = np.setdiff1d(z[0], coarse[0])
    assert np.all((added >= 3.0) & (added <= 4.0))


# --------------------------------------------------------------------------- #
# Render paths
# --------------------------------------------------------------------------- #

def test_pass_counts_per_path():
    assert RenderConfig(path="coarse_fine", n_coarse=64, n_fine=128).passes_per_ray() == 256
    assert RenderConfig(path="terminerf", n_samples=16).passes_per_ray() == 17
    assert RenderConfig(path="terminerf", n_samples=16, n_uniform=8).passes_per_ray() == 25
    assert RenderConfig(path="oracle_dense").passes_per_ray() == 512
    with pytest.raises(ValueError):
        RenderConfig(background=(2.0, 0.0, 0.0))


def test_coarse_fine_stats(ball_scene):
    cfg = RenderConfig(path="coarse_fine", n_coarse=8, n_fine=16)
    origins = np.tile([0.0, 0.0, 4.0], (5, 1))
    dirs = np.tile([0.0, 0.0, -1.0], (5, 1))
    _, stats = render_rays(RenderModels(field=ball_scene), origins, dirs, cfg)
    assert stats.coarse_passes == 5 * 8
    assert stats.color_passes == 5 * (8 + 16)
    assert stats.passes_per_ray() == pytest.approx(8 + 8 + 16)


def test_terminerf_with_oracle_sampler(ball_scene):
    sampler = OracleSampler(ball_scene, n_bins=15, n_dense=128)
    models = RenderModels(field=ball_scene, sampler=sampler)
    cfg = RenderConfig(path="terminerf", n_samples=32)

    color, stats = render_ray(models, Ray.towards([0, 0, 4], [0, 0, -1]), cfg)
    np.testing.assert_allclose(color, [1.0, 0.0, 0.0], atol=0.05)
    assert stats.sampler_passes == 1
    assert stats.color_passes == 32


@pytest.mark.slow
def test_terminerf_error_shrinks_with_more_samples(ball_scene):
    cam = orbit_cameras(1, width=8, height=8)[0]
    reference, _ = render_image(RenderModels(field=ball_scene), cam, RenderConfig(path="oracle_dense"))
    models = RenderModels(field=ball_scene, sampler=OracleSampler(ball_scene))
    errors = []
    for n in (4, 8, 16, 32, 64):
        image, _ = render_image(models, cam, RenderConfig(path="terminerf", n_samples=n))
        errors.append(float(np.mean((image.pixels.astype(np.float64) - reference.pixels) ** 2)))
    for coarse, fine in zip(errors, errors[1:]):
        assert fine <= 1.1 * coarse + 1e-4
    assert errors[-1] <= errors[0] + 1e-6


def test_terminerf_skips_missing_rays(ball_scene):
    sampler = OracleSampler(ball_scene, n_bins=7, n_dense=64)
    models = RenderModels(field=ball_scene, sampler=sampler)
    cfg = RenderConfig(path="terminerf", n_samples=8, n_uniform=4, background=(0.0, 1.0, 0.0))
    origins = np.array([[0.0, 0.0, 4.0], [5.0, 0.0, 4.0]])
    dirs = np.tile([0.0, 0.0, -1.0], (2, 1))
    colors, stats = render_rays(models, origins, dirs, cfg)
    np.testing.assert_allclose(colors[1], [0.0, 1.0, 0.0])
    assert stats.rays_skipped == 1
    assert stats.total_passes == 1 + 8 + 4
    assert stats.passes_per_ray() == pytest.approx(13)
    assert sampler.forward_passes == 1


def test_terminerf_needs_a_sampler(ball_scene):
    with pytest.raises(UsageError):
        render_rays(RenderModels(field=ball_scene), np.array([[0.0, 0.0, 4.0]]), np.array([[0.0, 0.0, -1.0]]), RenderConfig())


def test_results_do_not_depend_on_chunking(shell_scene):
    cam = orbit_cameras(1, width=6, height=6)[0]
    origins, dirs = cam.generate_rays()
    cfg = RenderConfig(path="coarse_fine", n_coarse=8, n_fine=8, stochastic=True, seed=11)
    models = RenderModels(field=shell_scene)
    whole, _ = render_rays(models, origins, dirs, cfg, settings=Settings(render_chunk_rays=1024))
    chunked, _ = render_rays(models, origins, dirs, cfg, settings=Settings(render_chunk_rays=5, render_workers=3))
    np.testing.assert_allclose(whole, chunked, rtol=0, atol=1e-12)


def test_oracle_image_is_deterministic(ball_scene):
    cam = orbit_cameras(1, width=8, height=8)[0]
    cfg = RenderConfig(path="oracle_dense", n_dense=64)
    first, stats = render_image(RenderModels(field=ball_scene), cam, cfg)
    second, _ = render_image(RenderModels(field=ball_scene), cam, cfg)
    np.testing.assert_array_equal(first.pixels, second.pixels)
    assert first.shape == (8, 8, 3)
    assert stats.color_passes == 64 * 64
    # the ball fills the image center, the corners see white background
    np.testing.assert_allclose(first.pixels[4, 4], [1.0, 0.0, 0.0], atol=1e-3)
    np.testing.assert_allclose(first.pixels[0, 0], [1.0, 1.0, 1.0], atol=1e-3)


# --------------------------------------------------------------------------- #
# Images
# --------------------------------------------------------------------------- #

def test_pfm_round_trip_is_exact(tmp_path, rng):
    image = ImageBuffer(rng.uniform(size=(3, 5, 3)))
    path = write_pfm(tmp_path / "img.pfm", image)
    np.testing.assert_array_equal(read_pfm(path).pixels, image.pixels)
    np.testing.assert_array_equal(read_image(path).pixels, image.pixels)


def test_png_round_trip_quantizes(tmp_path, rng):
    image = ImageBuffer(rng.uniform(size=(4, 4, 3)))
    path = write_png(tmp_path / "img.png", image)
    loaded = read_image(path)
    assert loaded.shape == image.shape
    assert np.max(np.abs(loaded.pixels - image.pixels)) <= 0.5 / 255 + 1e-6


def test_image_buffer_shape_check():
    with pytest.raises(DimensionMismatch):
        ImageBuffer(np.zeros((4, 4)))


def test_psnr_from_mse():
    assert psnr_from_mse(0.01) == pytest.approx(20.0)
    assert psnr_from_mse(1.0) == pytest.approx(0.0)
    assert psnr_from_mse(0.0) == PSNR_CAP
    assert psnr_from_mse(1e-20) == PSNR_CAP
