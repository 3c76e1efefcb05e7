from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.errors import CameraManifestError, InvalidCount, InvalidGrid, RayMissesScene
from src.geometry.bins import (
    BinGrid,
    boundary_z,
    centered_log_fractions,
    make_bin_grid,
    segment_fractions,
    segment_points,
)
from src.field.scene import DEFAULT_BOUNDS
from src.geometry.camera import Camera, look_at, orbit_cameras, read_camera_manifest, write_camera_manifest
from src.geometry.rays import (
    Ray,
    SceneBounds,
    canonicalize_segment,
    canonicalize_segments,
    sphere_intersect_segment,
    sphere_intersect_segments,
    z_values,
)

unit = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False)


def test_axis_ray_segment_is_centered(bounds):
    seg = canonicalize_segment(Ray.towards([0, 0, 5], [0, 0, -1]), bounds)
    np.testing.assert_allclose(seg.a, [0, 0, 2])
    np.testing.assert_allclose(seg.b, [0, 0, -2])
    assert seg.length == pytest.approx(bounds.segment_length)


def test_sphere_form_returns_entry_and_exit(bounds):
    seg = sphere_intersect_segment(Ray.towards([0, 0, 5], [0, 0, -1]), bounds)
    np.testing.assert_allclose(seg.a, [0, 0, 1.8])
    np.testing.assert_allclose(seg.b, [0, 0, -1.8])
    assert seg.form == "sphere"


def test_tangent_ray_misses(bounds):
    ray = Ray.towards([1.8, 0, 5], [0, 0, -1])
    with pytest.raises(RayMissesScene):
        canonicalize_segment(ray, bounds)
    with pytest.raises(RayMissesScene):
        sphere_intersect_segment(ray, bounds)


def test_default_bounds_match_scene_defaults():
    fresh = SceneBounds()
    fields = ("center", "radius", "segment_length", "near", "far")
    assert [getattr(fresh, f) for f in fields] == [getattr(DEFAULT_BOUNDS, f) for f in fields]
    assert fresh.radius == 1.8


def test_origin_inside_sphere_is_rejected(bounds):
    with pytest.raises(InvalidGrid):
        canonicalize_segment(Ray.towards([0, 0, 0.5], [0, 0, -1]), bounds)


def test_ray_requires_unit_direction():
    with pytest.raises(InvalidGrid):
        Ray(origin=np.zeros(3), direction=np.array([0.0, 0.0, 2.0]))


@settings(max_examples=50, deadline=None)
@given(dx=unit, dy=unit, shift=st.floats(min_value=0.0, max_value=3.0))
def test_segment_ignores_origin_position_along_line(dx, dy, shift):
    bounds = DEFAULT_BOUNDS
    direction = np.array([dx * 0.3, dy * 0.3, -1.0])
    direction /= np.linalg.norm(direction)
    origin = np.array([0.1, -0.2, 0.0]) - 6.0 * direction
    first = canonicalize_segment(Ray(origin, direction), bounds)
    moved = canonicalize_segment(Ray(origin + shift * direction * 0.5, direction), bounds)
    np.testing.assert_allclose(first.a, moved.a, atol=1e-9)
    np.testing.assert_allclose(first.b, moved.b, atol=1e-9)
    assert first.length == pytest.approx(bounds.segment_length)


def test_batched_forms_agree_with_single(bounds):
    origins = np.array([[0.0, 0.0, 5.0], [0.3, 0.2, 5.0], [3.0, 0.0, 5.0]])
    dirs = np.tile([0.0, 0.0, -1.0], (3, 1))
    a, b, hit = canonicalize_segments(origins, dirs, bounds)
    assert hit.tolist() == [True, True, False]
    seg = canonicalize_segment(Ray(origins[1], dirs[1]), bounds)
    np.testing.assert_allclose(a[1], seg.a)
    np.testing.assert_allclose(b[1], seg.b)

    a_s, b_s, hit_s = sphere_intersect_segments(origins, dirs, bounds)
    assert hit_s.tolist() == [True, True, False]
    np.testing.assert_allclose(np.linalg.norm(a_s[:2], axis=-1), bounds.radius)
    np.testing.assert_allclose(np.linalg.norm(b_s[:2], axis=-1), bounds.radius)


def test_z_values_measure_from_origin():
    origins = np.array([[0.0, 0.0, 5.0]])
    dirs = np.array([[0.0, 0.0, -1.0]])
    points = np.array([[[0.0, 0.0, 3.0], [0.0, 0.0, -1.0]]])
    np.testing.assert_allclose(z_values(points, origins, dirs), [[2.0, 6.0]])


# --------------------------------------------------------------------------- #
# Bins
# --------------------------------------------------------------------------- #

@pytest.mark.parametrize("n_points", [4, 8, 32, 64])
def test_centered_log_fractions_shape(n_points):
    s = centered_log_fractions(n_points)
    assert s.size == n_points - 1
    assert s[0] == pytest.approx(0.0)
    assert s[-1] == pytest.approx(1.0)
    assert np.all(np.diff(s) > 0)
    np.testing.assert_allclose(s + s[::-1], 1.0, atol=1e-12)
    # densest around the midpoint
    gaps = np.diff(s)
    assert gaps[len(gaps) // 2] < gaps[0]


def test_centered_log_fractions_rejects_odd_or_small():
    with pytest.raises(InvalidCount):
        centered_log_fractions(5)
    with pytest.raises(InvalidCount):
        centered_log_fractions(2)


def test_segment_fractions_modes():
    assert segment_fractions("centered_log", 31).size == 31
    np.testing.assert_allclose(segment_fractions("equidistant", 5), [0, 0.25, 0.5, 0.75, 1.0])
    with pytest.raises(InvalidCount):
        segment_fractions("equidistant", 2)
    with pytest.raises(InvalidCount):
        segment_fractions("spiral", 9)  # type: ignore[arg-type]


def test_bin_grid_of_axis_ray(bounds):
    ray = Ray.towards([0, 0, 5], [0, 0, -1])
    grid = make_bin_grid(canonicalize_segment(ray, bounds), ray, "equidistant", 5)
    np.testing.assert_allclose(grid.boundaries, [3.0, 4.0, 5.0, 6.0, 7.0])
    assert grid.n_bins == 5
    np.testing.assert_allclose(grid.edges(6.0), [3.0, 4.0, 5.0, 6.0, 7.0, 7.0])
    np.testing.assert_allclose(grid.edges(9.0)[-1], 9.0)


def test_bin_grid_validation():
    with pytest.raises(InvalidGrid):
        BinGrid(boundaries=np.array([1.0, 1.0, 2.0]))
    with pytest.raises(InvalidGrid):
        BinGrid(boundaries=np.array([-0.5, 1.0]))
    with pytest.raises(InvalidGrid):
        BinGrid(boundaries=np.array([1.0]), open_ended=False)
    closed = BinGrid(boundaries=np.array([1.0, 2.0, 3.0]), open_ended=False)
    assert closed.n_bins == 2


def test_boundary_z_matches_points_on_ray(bounds):
    origins = np.array([[0.2, 0.1, 5.0]])
    dirs = np.array([[0.0, 0.0, -1.0]])
    a, b, _ = canonicalize_segments(origins, dirs, bounds)
    fractions = segment_fractions("centered_log", 15)
    z = boundary_z(a, b, origins, dirs, fractions)
    pts = segment_points(a, b, fractions)
    np.testing.assert_allclose(z, z_values(pts, origins, dirs))


# --------------------------------------------------------------------------- #
# Cameras
# --------------------------------------------------------------------------- #

def test_generated_rays_are_unit_and_aimed_at_target():
    cam = Camera(c2w=look_at([0, 0, 4]), fov_x=0.7, width=5, height=5)
    origins, dirs = cam.generate_rays()
    assert origins.shape == dirs.shape == (25, 3)
    np.testing.assert_allclose(np.linalg.norm(dirs, axis=-1), 1.0)
    np.testing.assert_allclose(dirs[12], [0, 0, -1], atol=1e-12)
    # row-major: first row is the top of the image
    assert dirs[0, 1] > 0 and dirs[0, 0] < 0


def test_orbit_cameras_face_center():
    cams = orbit_cameras(6, width=4, height=4)
    assert [c.name for c in cams[:2]] == ["r_000", "r_001"]
    for cam in cams:
        np.testing.assert_allclose(np.linalg.norm(cam.position), 4.0)
        forward = -cam.c2w[:3, 2]
        np.testing.assert_allclose(forward, -cam.position / 4.0, atol=1e-12)


def test_camera_manifest_round_trip(tmp_path):
    cams = orbit_cameras(3, width=6, height=4)
    path = tmp_path / "cameras.txt"
    write_camera_manifest(path, cams)
    loaded = read_camera_manifest(path)
    assert [c.name for c in loaded] == [c.name for c in cams]
    assert (loaded[0].width, loaded[0].height) == (6, 4)
    for a, b in zip(cams, loaded):
        np.testing.assert_array_equal(a.c2w, b.c2w)
        assert a.fov_x == b.fov_x


@pytest.mark.parametrize(
    "text",
    [
        "resolution 4 4\nframe f " + " ".join(["0"] * 16) + "\n",
        "camera_angle_x 0.7\nresolution 4 4\n",
        "camera_angle_x 0.7\nresolution 4 4\nframe f 1 2 3\n",
        "camera_angle_x abc\nresolution 4 4\n",
    ],
)
def test_bad_camera_manifest(tmp_path, text):
    path = tmp_path / "cameras.txt"
    path.write_text(text)
    with pytest.raises(CameraManifestError):
        read_camera_manifest(path)
