from __future__ import annotations

import numpy as np
import pytest

from src.errors import SceneParseError, UnknownPreset, UsageError
from src.field.oracle import dense_grid, dense_samples, oracle_weights
from src.field.scene import (
    DEFAULT_BOUNDS,
    PRESETS,
    AnalyticScene,
    Primitive,
    eval_field,
    format_scene,
    load_scene,
    parse_scene,
    preset_scene,
    save_scene,
)
from src.geometry.rays import Ray


def test_solid_ball_density_inside_and_out(ball_scene):
    inside = eval_field(ball_scene, [0.0, 0.0, 0.5], [0.0, 0.0, -1.0])
    outside = eval_field(ball_scene, [0.0, 0.0, 1.5], [0.0, 0.0, -1.0])
    assert inside.density == pytest.approx(50.0)
    np.testing.assert_allclose(inside.color, [1.0, 0.0, 0.0])
    assert outside.density == 0.0


def test_shell_peaks_at_radius(shell_scene):
    on_shell = eval_field(shell_scene, [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0])
    center = eval_field(shell_scene, [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0])
    assert on_shell.density == pytest.approx(10.0)
    assert center.density < 1e-6


def test_tint_depends_on_view_direction(shell_scene):
    facing = eval_field(shell_scene, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    away = eval_field(shell_scene, [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0])
    np.testing.assert_allclose(facing.color, [0.2, 0.3, 0.9])
    np.testing.assert_allclose(away.color, 0.5 * np.array([0.2, 0.3, 0.9]))


def test_overlapping_densities_add_and_colors_average():
    scene = AnalyticScene(
        primitives=(
            Primitive("solid_ball", (0, 0, 0), 0.5, 10.0, (1.0, 0.0, 0.0)),
            Primitive("box", (0, 0, 0), 0.5, 30.0, (0.0, 0.0, 1.0)),
        ),
        bounds=DEFAULT_BOUNDS,
    )
    rgb, sigma = scene.query(np.zeros((1, 3)), np.array([[0.0, 0.0, 1.0]]))
    assert sigma[0] == pytest.approx(40.0)
    np.testing.assert_allclose(rgb[0], [0.25, 0.0, 0.75])


def test_primitive_outside_bounds_rejected():
    with pytest.raises(ValueError):
        AnalyticScene(primitives=(Primitive("solid_ball", (1.5, 0, 0), 0.5, 1.0, (1, 1, 1)),), bounds=DEFAULT_BOUNDS)


def test_primitive_validation():
    with pytest.raises(ValueError):
        Primitive("cone", (0, 0, 0), 1.0, 1.0, (1, 1, 1))  # type: ignore[arg-type]
    with pytest.raises(ValueError):
        Primitive("box", (0, 0, 0), 1.0, -1.0, (1, 1, 1))
    with pytest.raises(ValueError):
        Primitive("box", (0, 0, 0), 1.0, 1.0, (1.5, 0, 0))


def test_edits_preserve_geometry(ball_scene):
    recolored = ball_scene.recolor((0.0, 1.0, 0.0))
    points = np.array([[0.0, 0.0, 0.5], [0.0, 0.9, 0.0]])
    dirs = np.tile([0.0, 0.0, -1.0], (2, 1))
    _, sigma_before = ball_scene.query(points, dirs)
    rgb, sigma_after = recolored.query(points, dirs)
    np.testing.assert_array_equal(sigma_before, sigma_after)
    np.testing.assert_allclose(rgb[0], [0.0, 1.0, 0.0])
    assert all(p.tint for p in ball_scene.with_tint().primitives)
    assert len(ball_scene.with_primitive(Primitive("box", (0, 0, 0), 0.2, 1.0, (0, 0, 0))).primitives) == 2


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_scene_file_round_trip(tmp_path, name):
    scene = preset_scene(name)
    path = tmp_path / "scene.txt"
    save_scene(path, scene)
    loaded = load_scene(path)
    assert loaded.primitives == scene.primitives
    assert loaded.bounds.center == scene.bounds.center
    assert loaded.bounds.far == scene.bounds.far
    assert format_scene(loaded) == format_scene(scene)


@pytest.mark.parametrize(
    "text, line_no",
    [
        ("0 0 0 1.8 4 2\n", 1),
        ("0 0 0 1.8 4 2 6\nsphere 0 0 0 1 1 1 1 1 0\n", 2),
        ("0 0 0 1.8 4 2 6\nbox 0 0 0 1 1 1 1 1\n", 2),
        ("0 0 0 1.8 4 2 6\nbox 0 0 0 0.5 1 1 1 1 2\n", 2),
        ("# only a comment\n", 0),
    ],
)
def test_scene_parse_errors(text, line_no):
    with pytest.raises(SceneParseError) as info:
        parse_scene(text)
    assert info.value.line_no == line_no


def test_oracle_weights_of_opaque_ball(ball_scene):
    ray = Ray.towards([0, 0, 4], [0, 0, -1])
    dist = oracle_weights(ball_scene, ray, dense_grid(ball_scene.bounds))
    assert len(dist) == 512
    assert dist.total == pytest.approx(1.0, abs=1e-6)
    # mass concentrates where the ray enters the ball (z = 3)
    peak = dist.z[np.argmax(dist.w)]
    assert peak == pytest.approx(3.0, abs=(6.0 - 2.0) / 512 + 1e-9)


def test_dense_samples_shapes(ball_scene):
    origins = np.array([[0.0, 0.0, 4.0], [0.0, 3.0, 4.0]])
    dirs = np.tile([0.0, 0.0, -1.0], (2, 1))
    z, rgb, sigma, deltas = dense_samples(ball_scene, origins, dirs, ball_scene.bounds, 64)
    assert z.shape == sigma.shape == deltas.shape == (2, 64)
    assert rgb.shape == (2, 64, 3)
    np.testing.assert_allclose(deltas, 4.0 / 64)
    assert sigma[1].max() == 0.0


def test_unknown_preset_is_a_usage_error():
    with pytest.raises(UnknownPreset) as info:
        preset_scene("nope")
    assert isinstance(info.value, UsageError)
    assert info.value.exit_code == 2


def _rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def test_symmetric_primitives_are_rotation_invariant():
    scene = preset_scene("two_shell")
    rng = np.random.default_rng(4)
    for _ in range(20):
        rot = _rotation(rng)
        x = rng.uniform(-1.0, 1.0, 3) * 1.7 / np.sqrt(3.0)
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        before = eval_field(scene, x, d).density
        after = eval_field(scene, rot @ x, d).density
        assert after == pytest.approx(before, abs=1e-9)


@pytest.mark.parametrize("offset", [0.0, 0.4])
def test_oracle_quadrature_converges(shell_scene, offset):
    ray = Ray.towards([offset, 0.0, 4.0], [0.0, 0.0, -1.0])
    bounds = shell_scene.bounds

    def coarse(n_bins: int) -> np.ndarray:
        w = oracle_weights(shell_scene, ray, dense_grid(bounds, n_bins)).w
        return w.reshape(256, -1).sum(axis=1)

    reference = coarse(4096)
    tv_512 = 0.5 * np.abs(coarse(512) - reference).sum()
    tv_1024 = 0.5 * np.abs(coarse(1024) - reference).sum()
    assert 0.0 < tv_1024 < 0.6 * tv_512
    assert abs(coarse(512).sum() - coarse(1024).sum()) < 1e-3
