from __future__ import annotations

import csv

import numpy as np
import pytest
from click.testing import CliRunner

from src.cli.evaluation import EVAL_COLUMNS, EvalRow, compare_command, eval_command, psnr, write_csv
from src.cli.main import cli
from src.config import Settings
from src.errors import DimensionMismatch, IncompatibleLogs
from src.geometry.camera import orbit_cameras
from src.logging_config import _numpy_to_builtin
from src.nn.networks import SamplingNetwork
from src.rendering.image_io import PSNR_CAP, ImageBuffer
from src.training.config import dump_config
from src.training.trainer import ColorModels


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def scene_dir(runner, tmp_path):
    out = tmp_path / "scene"
    result = runner.invoke(cli, ["gen-scene", "--preset", "ball", "--views", "3", "--resolution", "8", "--out", str(out)])
    assert result.exit_code == 0, result.output
    return out


def _eval_table(path, representation: str, samples=("16", "32"), psnrs=(20.0, 25.0)):
    rows = [EvalRow("coarse_fine", "-", "64+128", 30.0, 256.0, 1.0, 0.0).formatted()]
    for n, value in zip(samples, psnrs):
        rows.append(EvalRow("terminerf", representation, n, value, 1.0 + int(n), 256.0 / (1 + int(n)), 0.0).formatted())
    write_csv(path, EVAL_COLUMNS, rows)
    return path


# --------------------------------------------------------------------------- #
# Metrics
# --------------------------------------------------------------------------- #

def test_psnr_values():
    a = ImageBuffer.filled(4, 4, (0.5, 0.5, 0.5))
    b = ImageBuffer.filled(4, 4, (0.6, 0.6, 0.6))
    assert psnr(a, b) == pytest.approx(20.0, abs=1e-4)
    black = ImageBuffer.filled(4, 4, (0.0, 0.0, 0.0))
    white = ImageBuffer.filled(4, 4, (1.0, 1.0, 1.0))
    assert psnr(black, white) == pytest.approx(0.0)
    assert psnr(a, a) == PSNR_CAP
    with pytest.raises(DimensionMismatch):
        psnr(a, ImageBuffer.filled(4, 5, (0.5, 0.5, 0.5)))


def test_compare_cross_tabulates(tmp_path):
    first = _eval_table(tmp_path / "a.csv", "segment+centered_log")
    second = _eval_table(tmp_path / "b.csv", "sphere+equidistant", psnrs=(18.0, 22.5))
    third = _eval_table(tmp_path / "c.csv", "segment+centered_log", psnrs=(19.0, 24.0))
    headers, rows = compare_command([first, second, third])
    assert headers == ["samples", "segment+centered_log", "sphere+equidistant", "segment+centered_log#2"]
    assert rows == [["16", "20.0000", "18.0000", "19.0000"], ["32", "25.0000", "22.5000", "24.0000"]]


def test_compare_rejects_incompatible_tables(tmp_path):
    first = _eval_table(tmp_path / "a.csv", "x")
    with pytest.raises(IncompatibleLogs):
        compare_command([first])
    other = _eval_table(tmp_path / "b.csv", "y", samples=("16", "64"))
    with pytest.raises(IncompatibleLogs):
        compare_command([first, other])
    (tmp_path / "junk.csv").write_text("a,b\n1,2\n")
    with pytest.raises(IncompatibleLogs):
        compare_command([first, tmp_path / "junk.csv"])


# --------------------------------------------------------------------------- #
# Commands
# --------------------------------------------------------------------------- #

def test_gen_scene_writes_inputs(scene_dir):
    assert (scene_dir / "scene.txt").exists()
    manifest = (scene_dir / "cameras.txt").read_text().splitlines()
    assert sum(line.startswith("frame ") for line in manifest) == 3
    assert (scene_dir / "metrics.prom").exists()


def test_render_oracle_writes_images(runner, scene_dir, tmp_path):
    out = tmp_path / "oracle"
    args = ["render-oracle", "--scene", str(scene_dir / "scene.txt"), "--cameras", str(scene_dir / "cameras.txt")]
    result = runner.invoke(cli, args + ["--dense", "32", "--out", str(out)])
    assert result.exit_code == 0, result.output
    for k in range(3):
        assert (out / "images" / f"r_{k:03d}.png").exists()
        assert (out / "images" / f"r_{k:03d}.pfm").exists()


def test_render_oracle_path_needs_scene(runner, scene_dir, tmp_path):
    args = ["render", "--path", "oracle", "--cameras", str(scene_dir / "cameras.txt"), "--out", str(tmp_path / "r")]
    assert runner.invoke(cli, args).exit_code == 2


def test_bad_scene_file_is_a_data_error(runner, scene_dir, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 0 0 1.8\n")
    args = ["render-oracle", "--scene", str(bad), "--cameras", str(scene_dir / "cameras.txt"), "--out", str(tmp_path / "o")]
    assert runner.invoke(cli, args).exit_code == 3


def test_non_utf8_inputs_map_to_exit_codes(runner, scene_dir, tmp_path):
    binary = b"\xff\xfe\x00garbage\x80\n"
    (tmp_path / "scene.txt").write_bytes(binary)
    (tmp_path / "cameras.txt").write_bytes(binary)
    (tmp_path / "run.cfg").write_bytes(binary)
    scene, cameras = str(scene_dir / "scene.txt"), str(scene_dir / "cameras.txt")

    bad_scene = ["render-oracle", "--scene", str(tmp_path / "scene.txt"), "--cameras", cameras]
    result = runner.invoke(cli, bad_scene + ["--out", str(tmp_path / "a")])
    assert result.exit_code == 3
    assert "UTF-8" in result.output

    bad_cameras = ["render-oracle", "--scene", scene, "--cameras", str(tmp_path / "cameras.txt")]
    assert runner.invoke(cli, bad_cameras + ["--out", str(tmp_path / "b")]).exit_code == 3

    bad_config = ["train-color", "--scene", scene, "--cameras", cameras, "--config", str(tmp_path / "run.cfg")]
    assert runner.invoke(cli, bad_config + ["--out", str(tmp_path / "c")]).exit_code == 2


def test_reruns_match_except_metrics_textfile(runner, scene_dir, tmp_path):
    args = ["render-oracle", "--scene", str(scene_dir / "scene.txt"), "--cameras", str(scene_dir / "cameras.txt")]
    for name in ("first", "second"):
        result = runner.invoke(cli, args + ["--dense", "32", "--seed", "3", "--out", str(tmp_path / name)])
        assert result.exit_code == 0, result.output

    def contents(root):
        return {
            p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file() and p.name != "metrics.prom"
        }

    first, second = contents(tmp_path / "first"), contents(tmp_path / "second")
    assert first and first == second
    assert (tmp_path / "first" / "metrics.prom").exists()


def test_build_depth_needs_exactly_one_source(runner, scene_dir, tmp_path):
    base = ["build-depth", "--scene", str(scene_dir / "scene.txt"), "--cameras", str(scene_dir / "cameras.txt"), "--out", str(tmp_path / "d")]
    assert runner.invoke(cli, base).exit_code == 2
    both = base + ["--oracle", "--checkpoint", str(scene_dir / "scene.txt")]
    assert runner.invoke(cli, both).exit_code == 2


def test_dump_config_uses_seed_flag(runner, scene_dir, tmp_path):
    args = ["train-color", "--scene", str(scene_dir / "scene.txt"), "--cameras", str(scene_dir / "cameras.txt")]
    result = runner.invoke(cli, args + ["--seed", "5", "--dump-config", "--out", str(tmp_path / "c")])
    assert result.exit_code == 0, result.output
    assert "seed=5" in result.stdout.splitlines()
    assert "n_bins=31" in result.stdout.splitlines()


def test_config_errors_exit_with_usage_code(runner, scene_dir, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("learning_rate=1\n")
    args = ["train-color", "--scene", str(scene_dir / "scene.txt"), "--cameras", str(scene_dir / "cameras.txt")]
    assert runner.invoke(cli, args + ["--config", str(cfg), "--out", str(tmp_path / "c")]).exit_code == 2
    cfg.write_text("n_bins=30\n")
    assert runner.invoke(cli, args + ["--config", str(cfg), "--out", str(tmp_path / "c")]).exit_code == 2


def test_compare_command_exit_codes(runner, tmp_path):
    first = _eval_table(tmp_path / "a.csv", "x")
    second = _eval_table(tmp_path / "b.csv", "y")
    assert runner.invoke(cli, ["compare", str(first), "--out", str(tmp_path / "cmp")]).exit_code == 2
    result = runner.invoke(cli, ["compare", str(first), str(second), "--out", str(tmp_path / "cmp")])
    assert result.exit_code == 0, result.output
    with (tmp_path / "cmp" / "compare.csv").open() as fh:
        assert next(csv.reader(fh)) == ["samples", "x", "y"]


@pytest.mark.slow
def test_pipeline_end_to_end(runner, scene_dir, tiny_config, tmp_path):
    scene = str(scene_dir / "scene.txt")
    cams = str(scene_dir / "cameras.txt")
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(dump_config(tiny_config.model_copy(update={"val_fraction": 0.0})))
    run = tmp_path / "run"

    def ok(*args: str) -> None:
        result = runner.invoke(cli, list(args))
        assert result.exit_code == 0, result.output

    ok("train-color", "--scene", scene, "--cameras", cams, "--config", str(cfg), "--out", str(run))
    assert (run / "color.ckpt").exists() and (run / "coarse.ckpt").exists()
    ok("build-depth", "--scene", scene, "--cameras", cams, "--oracle", "--config", str(cfg), "--out", str(run))
    ok("train-sampler", "--scene", scene, "--depth", str(run / "depth.bin"), "--cameras", cams, "--config", str(cfg), "--out", str(run))
    ok("finetune", "--scene", scene, "--cameras", cams, "--checkpoint", str(run), "--config", str(cfg), "--out", str(run / "ft"))
    ok("adapt", "--scene", scene, "--cameras", cams, "--checkpoint", str(run), "--edit", "recolor", "--config", str(cfg), "--out", str(run / "ad"))
    ok("render", "--cameras", cams, "--checkpoint", str(run), "--samples", "8", "--out", str(run / "img"))
    ok("eval", "--cameras", cams, "--checkpoint", str(run), "--scene", scene, "--samples", "8", "--out", str(run / "ev"))

    with (run / "img" / "render.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert all(float(r["passes_per_ray"]) == pytest.approx(9.0) for r in rows)

    with (run / "ev" / "eval.csv").open() as fh:
        table = list(csv.DictReader(fh))
    assert [r["method"] for r in table] == ["coarse_fine", "coarse_fine", "terminerf"]
    assert table[1]["samples"] == "2+4"
    assert table[2]["representation"] == "segment+centered_log"
    assert np.isfinite(float(table[2]["psnr"]))

    second = runner.invoke(cli, ["eval", "--cameras", cams, "--checkpoint", str(run), "--scene", scene, "--samples", "8", "--out", str(run / "ev2")])
    assert second.exit_code == 0
    assert (run / "ev" / "eval.csv").read_bytes() == (run / "ev2" / "eval.csv").read_bytes()
    assert "0.1 0.2 0.9" in (run / "ad" / "scene.txt").read_text()


def test_log_processor_converts_numpy_values():
    event = _numpy_to_builtin(
        None, "info", {"event": "x", "rays": np.int64(3), "loss": np.float32(0.5), "w": np.zeros(2), "z": np.zeros((8, 8))}
    )
    assert event["rays"] == 3 and type(event["rays"]) is int
    assert event["loss"] == 0.5 and type(event["loss"]) is float
    assert event["w"] == [0.0, 0.0]
    assert event["z"] == "<array (8, 8) float64>"


def test_eval_command_rows_and_speedups(bounds, tiny_arch):
    color = ColorModels.create(bounds, tiny_arch, seed=0)
    sampler = SamplingNetwork(bounds, n_bins=7, arch=tiny_arch, seed=0)
    cams = orbit_cameras(1, width=4, height=4)
    refs = [ImageBuffer.filled(4, 4, (1.0, 1.0, 1.0))]

    rows = eval_command(color, sampler, cams, refs, [8], settings=Settings(record_wall_time=False))

    assert [(r.method, r.representation, r.samples) for r in rows] == [
        ("coarse_fine", "-", "64+128"),
        ("coarse_fine", "-", "2+4"),
        ("terminerf", "segment+centered_log", "8"),
    ]
    assert [r.passes_per_ray for r in rows] == [256.0, 8.0, 9.0]
    assert rows[0].speedup == pytest.approx(1.0)
    assert rows[2].speedup == pytest.approx(256.0 / 9.0)
    assert all(r.wall_ms == 0.0 for r in rows)
