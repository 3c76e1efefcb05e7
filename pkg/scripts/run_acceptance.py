"""
Desk-scale acceptance experiments for the sampler, the render paths and the
training regimes. Each check prints its measurements and PASS/FAIL; the exit
status is the number of failed checks.

    python scripts/run_acceptance.py --out runs/acceptance
    python scripts/run_acceptance.py --quick --only mass --only blur

--quick shrinks every budget so the whole run finishes in a few minutes; the
thresholds are only meaningful at the default budgets.
"""

import sys
import os
import tempfile
import time
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple

import click
import numpy as np

# Ensure src is in pythonpath
sys.path.append(os.getcwd())

from src.cli.evaluation import psnr
from src.field.oracle import DENSE_BINS, dense_samples
from src.field.scene import AnalyticScene, format_scene, preset_scene
from src.geometry.bins import boundary_z
from src.geometry.camera import orbit_cameras
from src.geometry.rays import parameterize_segments
from src.logging_config import setup_logging
from src.nn.networks import ColorNetwork, SamplingNetwork
from src.rendering.image_io import ImageBuffer
from src.rendering.renderer import RenderConfig, RenderModels, render_image
from src.rendering.volume import transmittance_weights_batch
from src.supervision.depth_dataset import DepthArrays, read_depth_dataset, stack_records
from src.training.config import TrainConfig
from src.training.data import RayDataset
from src.training.trainer import (
    ColorModels,
    adapt_to_edit,
    build_depth_dataset,
    finetune_joint,
    train_color,
    train_sampler,
)

Check = Tuple[str, bool, str]


class Bench:
    """Cameras, budgets and cached oracle renders shared by the checks."""

    def __init__(self, out_dir: Path, quick: bool, seed: int):
        self.out_dir = out_dir
        self.seed = seed
        res = 24 if quick else 64
        self.train_cams = orbit_cameras(8 if quick else 24, width=res, height=res)
        # held-out views sit at a different elevation than every training view
        self.test_cams = orbit_cameras(3 if quick else 6, elevation_deg=35.0, width=res, height=res)
        scale = 0.1 if quick else 1.0
        self.cfg = TrainConfig(
            seed=seed,
            batch_rays=256,
            color_iters=max(int(3000 * scale), 50),
            sampler_iters=max(int(20000 * scale), 100),
            joint_iters=max(int(1000 * scale), 20),
            adapt_iters=max(int(600 * scale), 20),
            n_coarse=32 if quick else 64,
            n_fine=32 if quick else 128,
            n_pred=32,
            n_uniform=16,
            val_every=max(int(250 * scale), 10),
            val_rays=512,
        )
        self._refs: Dict[str, List[ImageBuffer]] = {}

    def references(self, scene: AnalyticScene) -> List[ImageBuffer]:
        key = format_scene(scene)
        if key not in self._refs:
            cfg = RenderConfig(path="oracle_dense")
            self._refs[key] = [render_image(RenderModels(field=scene), cam, cfg)[0] for cam in self.test_cams]
        return self._refs[key]

    def depth_arrays(self, scene: AnalyticScene, cfg: TrainConfig) -> DepthArrays:
        dataset = RayDataset.from_scene(scene, self.train_cams)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "depth.bin"
            build_depth_dataset(scene, dataset, cfg, path)
            return stack_records(read_depth_dataset(path))

    def sampler(self, scene: AnalyticScene, cfg: TrainConfig) -> SamplingNetwork:
        sampler = SamplingNetwork(
            scene.bounds,
            n_bins=cfg.n_bins,
            mode=cfg.bin_mode,
            form=cfg.ray_param,
            arch=cfg.architecture(),
            seed=cfg.seed,
        )
        res = self.train_cams[0]
        train_sampler(self.depth_arrays(scene, cfg), sampler, cfg, image_shape=(res.height, res.width))
        return sampler

    def mean_psnr(self, models: RenderModels, scene: AnalyticScene, cfg: RenderConfig) -> Tuple[float, float]:
        """Mean held-out PSNR and forward passes per traced ray."""
        scores, passes, rays = [], 0, 0
        for cam, ref in zip(self.test_cams, self.references(scene)):
            image, stats = render_image(models, cam, cfg)
            scores.append(psnr(image, ref))
            passes += stats.total_passes
            rays += stats.traced_rays
        return float(np.mean(scores)), passes / max(rays, 1)


# --------------------------------------------------------------------------- #
# Checks
# --------------------------------------------------------------------------- #

def _oracle_bin_mass(z: np.ndarray, w: np.ndarray, boundaries: np.ndarray) -> np.ndarray:
    """Dense oracle mass gathered into each sampler bin; mass before the first boundary is dropped."""
    idx = np.searchsorted(boundaries, z, side="right") - 1
    keep = idx >= 0
    return np.bincount(idx[keep], weights=w[keep], minlength=boundaries.size)


def check_sampler_mass(bench: Bench) -> Check:
    scene = preset_scene("two_shell")
    sampler = bench.sampler(scene, bench.cfg)

    rng = np.random.default_rng(bench.seed + 101)
    origins, dirs = [], []
    for cam in bench.test_cams:
        o, d = cam.generate_rays()
        origins.append(o)
        dirs.append(d)
    origins, dirs = np.concatenate(origins), np.concatenate(dirs)
    a, b, hit = parameterize_segments(origins, dirs, scene.bounds, sampler.form)
    rows = np.flatnonzero(hit)
    rows = np.sort(rng.permutation(rows)[:1000])
    pred = sampler.predict(a[rows], b[rows])
    boundaries = boundary_z(a[rows], b[rows], origins[rows], dirs[rows], sampler.fractions)
    z, _, sigma, deltas = dense_samples(scene, origins[rows], dirs[rows], scene.bounds, DENSE_BINS)
    w = transmittance_weights_batch(sigma, deltas)

    captured = []
    for k in range(rows.size):
        mass = _oracle_bin_mass(z[k], w[k], boundaries[k])
        total = mass.sum()
        if total < 1e-3:
            continue
        order = np.argsort(mass)[::-1]
        top = order[: int(np.searchsorted(np.cumsum(mass[order]), 0.95 * total)) + 1]
        captured.append(pred[k, top].sum())
    share = float(np.mean(captured)) if captured else 0.0
    return "sampler mass on two_shell", share >= 0.80, f"{share:.3f} of predicted mass in oracle 95% bins ({len(captured)} rays)"


_pipeline_cache: Dict[str, object] = {}


def _trained_pipeline(bench: Bench) -> Tuple[AnalyticScene, ColorModels, SamplingNetwork]:
    if not _pipeline_cache:
        scene = preset_scene("ball")
        dataset = RayDataset.from_scene(scene, bench.train_cams)
        color = ColorModels.create(scene.bounds, bench.cfg.architecture(), seed=bench.seed)
        train_color(dataset, color, bench.cfg, log_path=bench.out_dir / "train_color.csv")
        sampler = bench.sampler(scene, bench.cfg)
        finetune_joint(color, sampler, dataset, bench.cfg, log_path=bench.out_dir / "finetune.csv")
        _pipeline_cache.update(scene=scene, color=color, sampler=sampler)
    c = _pipeline_cache
    return c["scene"], c["color"], c["sampler"]


def check_speed_quality(bench: Bench) -> Check:
    scene, color, sampler = _trained_pipeline(bench)
    models = color.render_models(sampler)
    ref_cfg = RenderConfig(path="coarse_fine", n_coarse=64, n_fine=128, seed=bench.seed)
    ref_psnr, ref_passes = bench.mean_psnr(models, scene, ref_cfg)
    ok = True
    details = [f"reference 64+128 {ref_psnr:.2f} dB @ {ref_passes:.1f} passes/ray"]
    for n, tolerance in ((16, 1.0), (32, 0.5)):
        score, passes = bench.mean_psnr(models, scene, RenderConfig(path="terminerf", n_samples=n, seed=bench.seed))
        ok &= score >= ref_psnr - tolerance
        if n == 16:
            ok &= ref_passes >= 8.0 * passes
        details.append(f"terminerf {n}: {score:.2f} dB @ {passes:.1f} passes/ray")
    return "speed/quality tradeoff", ok, "; ".join(details)


def _sampler_psnr(bench: Bench, scene: AnalyticScene, cfg: TrainConfig, samples: Sequence[int]) -> List[float]:
    """Held-out PSNR of terminerf renders through the true field, isolating the sampler."""
    sampler = bench.sampler(scene, cfg)
    models = RenderModels(field=scene, sampler=sampler)
    return [bench.mean_psnr(models, scene, RenderConfig(path="terminerf", n_samples=n, seed=cfg.seed))[0] for n in samples]


def check_representation(bench: Bench) -> Check:
    scene = preset_scene("shell")
    samples = (16, 32)
    seg = _sampler_psnr(bench, scene, bench.cfg.model_copy(update={"ray_param": "segment", "bin_mode": "centered_log"}), samples)
    sph = _sampler_psnr(bench, scene, bench.cfg.model_copy(update={"ray_param": "sphere", "bin_mode": "equidistant"}), samples)
    ok = all(s >= o for s, o in zip(seg, sph))
    detail = ", ".join(f"n={n}: {s:.2f} vs {o:.2f} dB" for n, s, o in zip(samples, seg, sph))
    return "segment+centered_log >= sphere+equidistant", ok, detail


def check_blur(bench: Bench) -> Check:
    scene = preset_scene("shell")
    blurred = _sampler_psnr(bench, scene, bench.cfg.model_copy(update={"label_kernel": 9, "label_sigma": 3.0}), (32,))[0]
    sharp = _sampler_psnr(bench, scene, bench.cfg.model_copy(update={"label_kernel": 1}), (32,))[0]
    # higher PSNR is lower MSE
    return "label blur K=9 vs K=1", blurred >= sharp, f"{blurred:.2f} vs {sharp:.2f} dB"


def check_adaptation(bench: Bench) -> Check:
    scene, color, sampler = _trained_pipeline(bench)
    edited = scene.recolor((0.1, 0.2, 0.9))
    dataset = RayDataset.from_scene(edited, bench.train_cams)

    scratch = ColorModels.create(edited.bounds, bench.cfg.architecture(), seed=bench.seed + 7)
    scratch_result = train_color(dataset, scratch, bench.cfg, log_path=bench.out_dir / "scratch_color.csv")
    ref_cfg = RenderConfig(path="coarse_fine", n_coarse=bench.cfg.n_coarse, n_fine=bench.cfg.n_fine, seed=bench.seed)
    scratch_psnr, _ = bench.mean_psnr(scratch.render_models(), edited, ref_cfg)

    fine = ColorNetwork(edited.bounds, color.fine.arch, label="color", mlp=color.fine.mlp.copy())
    adapted = ColorModels(coarse=color.coarse, fine=fine)
    result = adapt_to_edit(adapted, sampler, dataset, bench.cfg, log_path=bench.out_dir / "adapt.csv")
    adapt_cfg = RenderConfig(path="terminerf", n_samples=bench.cfg.adapt_samples, seed=bench.seed)
    adapt_psnr, _ = bench.mean_psnr(adapted.render_models(sampler), edited, adapt_cfg)

    share = result.forward_passes / max(scratch_result.forward_passes, 1)
    ok = adapt_psnr >= scratch_psnr - 1.0 and share <= 0.25
    return "edit adaptation", ok, f"{adapt_psnr:.2f} vs scratch {scratch_psnr:.2f} dB using {share:.1%} of its passes"


def check_donerf(bench: Bench) -> Check:
    scene = preset_scene("two_shell")
    weights = _sampler_psnr(bench, scene, bench.cfg.model_copy(update={"supervision": "weights"}), (32,))[0]
    single = _sampler_psnr(bench, scene, bench.cfg.model_copy(update={"supervision": "donerf"}), (32,))[0]
    return "single depth < weight distribution", single < weights, f"donerf {single:.2f} vs weights {weights:.2f} dB"


CHECKS: Dict[str, Callable[[Bench], Check]] = {
    "mass": check_sampler_mass,
    "tradeoff": check_speed_quality,
    "representation": check_representation,
    "blur": check_blur,
    "adapt": check_adaptation,
    "donerf": check_donerf,
}


@click.command()
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="runs/acceptance", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--quick", is_flag=True, help="Small budgets for a smoke run.")
@click.option("--only", multiple=True, type=click.Choice(sorted(CHECKS)), help="Run a subset of the checks.")
def main(out_dir: str, seed: int, quick: bool, only: Tuple[str, ...]) -> None:
    setup_logging()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bench = Bench(out, quick, seed)

    failed = 0
    for name in only or CHECKS:
        print(f"Running {name}...")
        start = time.perf_counter()
        title, ok, detail = CHECKS[name](bench)
        failed += not ok
        print(f"  [{'PASS' if ok else 'FAIL'}] {title}: {detail} ({time.perf_counter() - start:.0f}s)")

    print(f"Finished! {failed} check(s) failed.")
    sys.exit(failed)


if __name__ == "__main__":
    main()
