import struct

import chex
import numpy as np
import pytest

from tactire.classify.dataset import DegenerateDataError
from tactire.classify.logistic import (
    decode_model,
    encode_model,
    fit_lr,
    lr_gradient,
    lr_objective,
    LRModel,
    MODEL_MAGIC,
    ModelFormatError,
)

CLASSES = ("Flat", "SemiCircle", "Triangle")


def blobs(n_per_class=20, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=4.0, size=(len(CLASSES), dim))
    features = np.concatenate(
        [c + rng.normal(size=(n_per_class, dim)) for c in centers]
    )
    labels = np.repeat(CLASSES, n_per_class)
    return features, labels


def onehot(labels):
    out = np.zeros((len(labels), len(CLASSES)))
    out[np.arange(len(labels)), [CLASSES.index(l) for l in labels]] = 1.0
    return out


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(6, 3))
    Y = onehot(["Flat", "SemiCircle", "Triangle", "Flat", "Flat", "Triangle"])
    params = {"weights": rng.normal(size=(3, 3)), "bias": rng.normal(size=3)}
    grad = lr_gradient(params, X, Y, 0.5)

    eps = 1e-6
    numeric = {}
    for name, value in params.items():
        g = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            up = {k: v.copy() for k, v in params.items()}
            down = {k: v.copy() for k, v in params.items()}
            up[name][idx] += eps
            down[name][idx] -= eps
            diff = lr_objective(up, X, Y, 0.5) - lr_objective(down, X, Y, 0.5)
            g[idx] = float(diff) / (2 * eps)
        numeric[name] = g
    chex.assert_trees_all_close(
        {k: np.asarray(v) for k, v in grad.items()}, numeric, rtol=1e-5, atol=1e-6
    )


def test_bias_is_not_penalized():
    X = np.zeros((2, 2))
    Y = onehot(["Flat", "Flat"])
    zero = {"weights": np.zeros((3, 2)), "bias": np.zeros(3)}
    shifted = {"weights": np.zeros((3, 2)), "bias": np.full(3, 7.0)}
    assert float(lr_objective(zero, X, Y, 0.1)) == pytest.approx(
        float(lr_objective(shifted, X, Y, 0.1))
    )
    assert float(lr_objective(zero, X, Y, 0.1)) == pytest.approx(2 * np.log(3))


def test_loss_decreases_every_iteration():
    features, labels = blobs()
    losses = []
    model = fit_lr(
        features,
        labels,
        CLASSES,
        C=0.5,
        max_iters=200,
        callback=lambda it, loss, grad_norm: losses.append(loss),
    )
    assert losses[0] == pytest.approx(len(labels) * np.log(3))
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0] / 10
    assert np.mean(model.predict(features) == labels) == 1.0
    np.testing.assert_allclose(model.predict_proba(features).sum(axis=1), 1.0)


def test_fit_is_deterministic():
    features, labels = blobs(seed=3)
    a = fit_lr(features, labels, CLASSES, max_iters=50)
    b = fit_lr(features, labels, CLASSES, max_iters=50)
    assert encode_model(a) == encode_model(b)


def test_feature_scale_is_applied_at_prediction():
    features, labels = blobs(seed=4)
    model = fit_lr(
        features * 4096, labels, CLASSES, max_iters=100, feature_scale=1 / 4096
    )
    assert model.feature_scale == 1 / 4096
    assert np.mean(model.predict(features * 4096) == labels) == 1.0


def test_degenerate_training_data():
    features, _ = blobs()
    with pytest.raises(DegenerateDataError):
        fit_lr(features, ["Flat"] * len(features), CLASSES)
    with pytest.raises(ValueError):
        fit_lr(*blobs(), CLASSES, C=0.0)


def test_predict_rejects_wrong_width():
    model = fit_lr(*blobs(), CLASSES, max_iters=5)
    with pytest.raises(ValueError):
        model.predict(np.zeros((1, 7)))


def test_model_file(tmp_path):
    model = fit_lr(*blobs(), CLASSES, C=0.25, max_iters=20)
    path = str(tmp_path / "model.awlr")
    model.save(path)
    loaded = LRModel.load(path)
    assert loaded.classes == CLASSES
    assert loaded.inverse_reg_C == 0.25
    np.testing.assert_array_equal(loaded.weights, model.weights)
    np.testing.assert_array_equal(loaded.bias, model.bias)
    data = encode_model(model)
    assert data[:4] == MODEL_MAGIC
    assert len(data) == 30 + sum(2 + len(c) for c in CLASSES) + 8 * (3 * 4 + 3)


def test_corrupt_model_files():
    data = encode_model(fit_lr(*blobs(), CLASSES, max_iters=5))
    with pytest.raises(ModelFormatError):
        decode_model(b"XXXX" + data[4:])
    with pytest.raises(ModelFormatError):
        decode_model(data[:4] + struct.pack("<H", 9) + data[6:])
    with pytest.raises(ModelFormatError):
        decode_model(data[:-1])
    with pytest.raises(ModelFormatError):
        decode_model(data[:10])
    nan = data[:-8] + struct.pack("<d", float("nan"))
    with pytest.raises(ModelFormatError):
        decode_model(nan)


@pytest.mark.parametrize("shift", [-1e3, -2.5, 0.125, 7.0, 1e3])
def test_shifting_every_bias_keeps_predictions(shift):
    rng = np.random.default_rng(11)
    model = LRModel(
        weights=rng.normal(size=(3, 5)), bias=rng.normal(size=3), classes=CLASSES
    )
    features = rng.normal(size=(200, 5))
    shifted = model.replace(bias=model.bias + shift)
    np.testing.assert_array_equal(shifted.predict(features), model.predict(features))
    np.testing.assert_allclose(
        shifted.predict_proba(features), model.predict_proba(features), atol=1e-9
    )
