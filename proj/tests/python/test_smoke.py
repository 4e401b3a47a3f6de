"""Smoke tests for the python bindings."""

import numpy as np
import pytest

liteseg = pytest.importorskip("liteseg")


def test_relu_sigmoid_match_numpy():
    x = np.linspace(-3, 3, 24, dtype=np.float32).reshape(2, 3, 2, 2)
    np.testing.assert_allclose(liteseg.relu(x), np.maximum(x, 0.0))
    np.testing.assert_allclose(liteseg.sigmoid(x), 1.0 / (1.0 + np.exp(-x)), rtol=1e-6)


def test_conv2d_identity_kernel():
    rng = np.random.default_rng(0)
    x = rng.random((1, 3, 5, 5), dtype=np.float32)
    weight = np.zeros((3, 3, 1, 1), dtype=np.float32)
    for c in range(3):
        weight[c, c, 0, 0] = 1.0
    np.testing.assert_array_equal(liteseg.conv2d(x, weight), x)


def test_bilinear_upsample_constant():
    x = np.full((1, 2, 3, 3), 0.7, dtype=np.float32)
    y = liteseg.bilinear_upsample(x, 6, 9)
    assert y.shape == (1, 2, 6, 9)
    np.testing.assert_allclose(y, 0.7, rtol=1e-6)


def test_adaptive_avg_pool_global_mean():
    rng = np.random.default_rng(1)
    x = rng.random((2, 3, 4, 6), dtype=np.float32)
    pooled = liteseg.adaptive_avg_pool(x, 1, 1)
    np.testing.assert_allclose(pooled[..., 0, 0], x.mean(axis=(2, 3)), atol=1e-6)


def test_channel_and_spatial_reductions():
    rng = np.random.default_rng(2)
    x = rng.random((1, 4, 3, 3), dtype=np.float32)
    mean, mx = liteseg.channel_mean_max(x)
    np.testing.assert_allclose(mean[:, 0], x.mean(axis=1), atol=1e-6)
    np.testing.assert_array_equal(mx[:, 0], x.max(axis=1))
    avg, smax = liteseg.spatial_avg_max_pool(x)
    np.testing.assert_allclose(avg[..., 0, 0], x.mean(axis=(2, 3)), atol=1e-6)
    np.testing.assert_array_equal(smax[..., 0, 0], x.max(axis=(2, 3)))


def test_uafm_blend_endpoints():
    rng = np.random.default_rng(3)
    f_up = rng.random((1, 3, 4, 4), dtype=np.float32)
    f_low = rng.random((1, 3, 4, 4), dtype=np.float32)
    ones = np.ones((1, 1, 4, 4), dtype=np.float32)
    np.testing.assert_allclose(liteseg.uafm_blend(f_up, f_low, ones), f_up, atol=1e-7)
    np.testing.assert_allclose(
        liteseg.uafm_blend(f_up, f_low, np.zeros_like(ones)), f_low, atol=1e-7
    )


def test_model_forward_predict_deterministic():
    model = liteseg.Model.preset("tiny", seed=7)
    rng = np.random.default_rng(4)
    image = rng.standard_normal((1, 3, 64, 128)).astype(np.float32)
    logits = model.forward(image)
    assert logits.shape == (1, 4, 64, 128)
    np.testing.assert_array_equal(logits, model.forward(image))
    labels = model.predict(image)
    assert labels.shape == (1, 64, 128)
    assert labels.max() <= 3
    assert model.num_parameters() > 0


def test_model_rejects_bad_input_size():
    model = liteseg.Model.preset("tiny", seed=7)
    bad = np.zeros((1, 3, 50, 60), dtype=np.float32)
    with pytest.raises(RuntimeError):
        model.forward(bad)


def test_checkpoint_round_trip(tmp_path):
    model = liteseg.Model.preset("tiny", seed=11)
    path = str(tmp_path / "tiny.ppls")
    model.save(path)
    loaded = liteseg.load_model(path)
    rng = np.random.default_rng(5)
    image = rng.standard_normal((1, 3, 64, 128)).astype(np.float32)
    np.testing.assert_array_equal(model.forward(image), loaded.forward(image))


def test_miou_perfect_prediction():
    rng = np.random.default_rng(6)
    labels = rng.integers(0, 4, size=(1, 16, 16)).astype(np.uint8)
    mean, per_class = liteseg.miou(labels, labels, 4)
    assert mean == pytest.approx(1.0)
    assert len(per_class) == 4


def test_synthetic_dataset_shapes_and_determinism():
    ds = liteseg.SyntheticShapesDataset(0, 4)
    assert len(ds) == 4
    image, labels = ds.get(2)
    assert image.shape == (3, 64, 128)
    assert labels.shape == (1, 64, 128)
    assert set(np.unique(labels)) <= {0, 1, 2, 3}
    image2, labels2 = liteseg.SyntheticShapesDataset(0, 4).get(2)
    np.testing.assert_array_equal(image, image2)
    np.testing.assert_array_equal(labels, labels2)


def test_train_from_json_smoke(tmp_path):
    config = """{
      "model": {"preset": "tiny"},
      "seed": 1,
      "iters": 6,
      "batch_size": 2,
      "optimizer": {"base_lr": 0.02},
      "dataset": {"type": "synthetic", "seed": 1, "num_samples": 8}
    }"""
    ckpt = str(tmp_path / "trained.ppls")
    losses = liteseg.train_from_json(config, ckpt)
    assert losses.shape == (6,)
    assert np.isfinite(losses).all()
    model = liteseg.load_model(ckpt)
    assert model.num_parameters() > 0
