from __future__ import annotations

import numpy as np
import pytest

from src.errors import CheckpointFormatError, ShapeMismatch
from src.nn.adam import AdamState, adam_step
from src.nn.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from src.nn.encoding import PositionalEncoding, encode
from src.nn.mlp import MlpModel, backward, forward
from src.nn.networks import ColorNetwork, SamplingNetwork


def test_encoding_layout():
    pe = PositionalEncoding(2)
    x = np.array([[0.25, -0.5, 1.0]])
    out = encode(pe, x)
    assert out.shape == (1, pe.output_dim(3)) == (1, 15)
    np.testing.assert_allclose(out[0, :3], x[0])
    np.testing.assert_allclose(out[0, 3:6], np.sin(np.pi * x[0]))
    np.testing.assert_allclose(out[0, 12:15], np.cos(2 * np.pi * x[0]))


def test_encoding_without_frequencies_must_include_input():
    assert PositionalEncoding(0).output_dim(3) == 3
    with pytest.raises(ValueError):
        PositionalEncoding(0, include_input=False)


def test_mlp_init_is_seeded():
    a = MlpModel.create(5, 2, width=8, depth=3, skip_layer=2, seed=7)
    b = MlpModel.create(5, 2, width=8, depth=3, skip_layer=2, seed=7)
    c = MlpModel.create(5, 2, width=8, depth=3, skip_layer=2, seed=8)
    assert a.fingerprint() == b.fingerprint() != c.fingerprint()
    assert a.weights[1].shape == (8 + 5, 8)


def test_mlp_rejects_bad_skip_and_input():
    with pytest.raises(ShapeMismatch):
        MlpModel.create(5, 2, width=8, depth=3, skip_layer=1)
    model = MlpModel.create(5, 2, width=8, depth=3)
    with pytest.raises(ShapeMismatch):
        forward(model, np.zeros((4, 6)))
    with pytest.raises(ShapeMismatch):
        forward(model, np.zeros((0, 5)))


def _numeric_grad(loss_fn, param: np.ndarray, index, eps: float = 1e-6) -> float:
    old = param[index]
    param[index] = old + eps
    up = loss_fn()
    param[index] = old - eps
    down = loss_fn()
    param[index] = old
    return (up - down) / (2 * eps)


def _check_grads(params, grads, loss_fn, rng, picks: int = 6) -> None:
    for param, grad in zip(params, grads):
        assert grad.shape == param.shape
        for _ in range(picks):
            index = tuple(int(rng.integers(s)) for s in param.shape)
            assert grad[index] == pytest.approx(_numeric_grad(loss_fn, param, index), rel=1e-4, abs=1e-7)


GRAD_SEEDS = range(20)


@pytest.mark.parametrize("seed", GRAD_SEEDS)
def test_mlp_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    model = MlpModel.create(4, 3, width=6, depth=3, skip_layer=2, seed=seed, dtype=np.float64)
    x = rng.normal(size=(5, 4))
    g = rng.normal(size=(5, 3))
    out, cache = forward(model, x)
    grads = backward(model, cache, g)
    _check_grads(model.parameters(), grads, lambda: float(np.sum(forward(model, x)[0] * g)), rng)


@pytest.mark.parametrize("seed", GRAD_SEEDS)
def test_color_network_backward_matches_finite_differences(bounds, tiny_arch, seed):
    rng = np.random.default_rng(seed)
    net = ColorNetwork(bounds, tiny_arch, seed=seed)
    net.mlp = net.mlp.astype(np.float64)
    points = rng.uniform(-1, 1, size=(6, 3))
    dirs = rng.normal(size=(6, 3))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    g_rgb = rng.normal(size=(6, 3))
    g_sigma = rng.normal(size=6)

    def loss() -> float:
        rgb, sigma = net.query(points, dirs)
        return float(np.sum(rgb * g_rgb) + np.sum(sigma * g_sigma))

    rgb, sigma, cache = net.forward(points, dirs)
    assert rgb.min() >= 0 and rgb.max() <= 1 and sigma.min() >= 0
    _check_grads(net.mlp.parameters(), net.backward(cache, g_rgb, g_sigma), loss, rng)


@pytest.mark.parametrize("seed", GRAD_SEEDS)
def test_sampler_backward_matches_finite_differences(bounds, tiny_arch, seed):
    rng = np.random.default_rng(seed)
    net = SamplingNetwork(bounds, n_bins=7, arch=tiny_arch, seed=seed)
    net.mlp = net.mlp.astype(np.float64)
    a, b, hit = net.segments(np.array([[0.0, 0.0, 5.0], [0.4, -0.3, 5.0]]), np.tile([0.0, 0.0, -1.0], (2, 1)))
    assert hit.all()
    g = rng.normal(size=(2, 7))

    weights, cache = net.forward(a, b)
    np.testing.assert_allclose(weights.sum(axis=-1), 1.0, atol=1e-6)
    assert weights.min() >= 0
    _check_grads(net.mlp.parameters(), net.backward(cache, g), lambda: float(np.sum(net.predict(a, b) * g)), rng)


def test_forward_pass_counting(bounds, tiny_arch):
    color = ColorNetwork(bounds, tiny_arch)
    color.query(np.zeros((10, 3)), np.tile([0.0, 0.0, 1.0], (10, 1)))
    assert color.forward_passes == 10

    sampler = SamplingNetwork(bounds, n_bins=7, arch=tiny_arch)
    a, b, _ = sampler.segments(np.array([[0.0, 0.0, 5.0]] * 3), np.tile([0.0, 0.0, -1.0], (3, 1)))
    sampler.predict(a, b)
    assert sampler.forward_passes == 3


def test_adam_first_step_moves_by_lr():
    param = np.array([1.0, -1.0, 0.5])
    grad = np.array([0.3, -2.0, 0.0])
    state = AdamState.for_params([param], lr=0.01)
    adam_step(state, [param], [grad])
    np.testing.assert_allclose(param, [0.99, -0.99, 0.5], atol=1e-6)
    assert state.step == 1


def test_adam_learning_rate_decay():
    state = AdamState(lr=1e-3, decay_rate=0.1, decay_steps=100)
    assert state.current_lr() == pytest.approx(1e-3)
    state.step = 100
    assert state.current_lr() == pytest.approx(1e-4)


def test_adam_shape_mismatch():
    state = AdamState.for_params([np.zeros(3)])
    with pytest.raises(ShapeMismatch):
        adam_step(state, [np.zeros(3)], [np.zeros(3), np.zeros(2)])


def test_checkpoint_round_trip_with_optimizer(tmp_path, bounds, tiny_arch):
    net = ColorNetwork(bounds, tiny_arch, seed=5, label="coarse")
    adam = AdamState.for_params(net.mlp.parameters(), lr=2e-4)
    grads = [np.full_like(p, 0.1) for p in net.mlp.parameters()]
    adam_step(adam, net.mlp.parameters(), grads)

    path = tmp_path / "coarse.ckpt"
    save_checkpoint(path, net, adam)
    loaded, loaded_adam = load_checkpoint(path)
    assert isinstance(loaded, ColorNetwork)
    assert loaded.label == "coarse"
    assert loaded.arch == tiny_arch
    assert loaded.mlp.fingerprint() == net.mlp.fingerprint()
    assert loaded_adam.step == 1
    assert loaded_adam.lr == pytest.approx(2e-4)
    for m, saved in zip(adam.m, loaded_adam.m):
        np.testing.assert_array_equal(m.astype(np.float32), saved)


def test_sampler_checkpoint_keeps_representation(tmp_path, bounds, tiny_arch):
    net = SamplingNetwork(bounds, n_bins=9, mode="equidistant", form="sphere", arch=tiny_arch)
    save_checkpoint(tmp_path / "sampler.ckpt", net)
    loaded, adam = load_checkpoint(tmp_path / "sampler.ckpt")
    assert adam is None
    assert isinstance(loaded, SamplingNetwork)
    assert (loaded.n_bins, loaded.mode, loaded.form) == (9, "equidistant", "sphere")
    assert loaded.mlp.fingerprint() == net.mlp.fingerprint()


def test_corrupt_checkpoints(tmp_path, bounds, tiny_arch):
    bad_magic = tmp_path / "bad.ckpt"
    bad_magic.write_bytes(b"NOTACKPT" + b"\x00" * 16)
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(bad_magic)

    good = tmp_path / "good.ckpt"
    save_checkpoint(good, ColorNetwork(bounds, tiny_arch))
    truncated = tmp_path / "short.ckpt"
    truncated.write_bytes(good.read_bytes()[:-10])
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(truncated)
    assert good.read_bytes().startswith(MAGIC)

    with pytest.raises(CheckpointFormatError):
        load_checkpoint(tmp_path / "missing.ckpt")


def test_adam_converges_on_a_quadratic():
    x = np.array([5.0])
    state = AdamState.for_params([x], lr=0.05, decay_rate=0.001, decay_steps=2000)
    for _ in range(2000):
        adam_step(state, [x], [2.0 * (x - 1.5)])
    assert abs(x[0] - 1.5) < 1e-3
