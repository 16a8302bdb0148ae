"""CNN architecture, forward/backward correctness, training, and model IO."""

import numpy as np
import pytest

from deeplcp.errors import (ConfigError, EmptyMap, FormatVersionError,
                            ShapeError)
from deeplcp.nn import (CLASSES, FILTER_HEIGHTS, FILTERS_PER_HEIGHT,
                        POOLED_SIZE, CnnModel, ConvFilter, TrainConfig,
                        _forward_batch, conv_forward, forward, identity,
                        init_model, load_model, max_over_time, predict,
                        predict_batch, save_model, train)
from deeplcp.semantic import REDUCED_ROWS

from helpers import max_gradient_error


def _random_input(rng):
    return rng.random((REDUCED_ROWS, 13))


# ------------------------------------------------------------- architecture

def test_filter_bank_layout():
    model = init_model(seed=0)
    assert len(model.filters) == 6
    assert [f.height for f in model.filters] == [5, 5, 6, 6, 7, 7]
    for f in model.filters:
        assert f.weights.shape == (f.height, 13)
    assert model.dense_w.shape == (CLASSES, POOLED_SIZE)
    assert model.dense_b.shape == (CLASSES,)


def test_feature_map_lengths():
    model = init_model(seed=1)
    x = np.random.default_rng(1).random((REDUCED_ROWS, 13))
    for f, expected in zip(model.filters[::2], (14, 13, 12)):
        assert conv_forward(x, f).shape == (expected,)


def test_forward_structural_invariants():
    model = init_model(seed=2)
    rng = np.random.default_rng(2)
    cache = _forward_batch(model, rng.random((4, REDUCED_ROWS, 13)))
    for hi, h in enumerate(FILTER_HEIGHTS):
        assert cache.pre[hi].shape == (4, REDUCED_ROWS - h + 1,
                                       FILTERS_PER_HEIGHT)
    assert cache.pooled.shape == (4, POOLED_SIZE)
    assert cache.probs.shape == (4, CLASSES)
    assert np.all(cache.probs >= 0)
    np.testing.assert_allclose(cache.probs.sum(axis=1), 1.0, atol=1e-12)


def test_prediction_is_simplex():
    model = init_model(seed=3)
    pred = predict(model, np.random.default_rng(3).random((REDUCED_ROWS, 13)))
    assert 0.0 <= pred.p_affected <= 1.0
    assert pred.p_affected + pred.p_unaffected == pytest.approx(1.0,
                                                                abs=1e-12)


# ---------------------------------------------------------- forward oracles

def test_conv_forward_against_hand_computation():
    x = np.array([[1.0, 2.0, 3.0],
                  [4.0, 5.0, 6.0],
                  [0.0, 1.0, 0.0],
                  [2.0, 2.0, 2.0]])
    filt = ConvFilter(height=2,
                      weights=np.array([[1.0, 0.0, -1.0],
                                        [0.5, 0.5, 0.5]]),
                      bias=0.1)
    raw = conv_forward(x, filt, activation=identity)
    np.testing.assert_allclose(raw, [5.6, -1.4, 3.1], atol=1e-12)
    np.testing.assert_allclose(conv_forward(x, filt), [5.6, 0.0, 3.1],
                               atol=1e-12)


def test_forward_matches_straight_line_reimplementation():
    """Batched forward vs. an independent loop-based computation."""
    model = init_model(seed=4)
    x = np.random.default_rng(4).random((REDUCED_ROWS, 13))
    pooled = []
    for f in model.filters:
        fm = [max(0.0, float(np.sum(x[t:t + f.height] * f.weights) + f.bias))
              for t in range(REDUCED_ROWS - f.height + 1)]
        pooled.append(max(fm))
    logits = np.asarray(pooled) @ model.dense_w.T + model.dense_b
    e = np.exp(logits - logits.max())
    expected = e / e.sum()
    pred = predict(model, x)
    assert pred.p_affected == pytest.approx(expected[0], abs=1e-12)
    assert pred.p_unaffected == pytest.approx(expected[1], abs=1e-12)


def test_conv_forward_shape_errors():
    filt = ConvFilter(height=2, weights=np.zeros((2, 3)), bias=0.0)
    with pytest.raises(ShapeError):
        conv_forward(np.zeros((4, 4)), filt)
    with pytest.raises(ShapeError):
        conv_forward(np.zeros((1, 3)), filt)


def test_max_over_time():
    assert max_over_time([0.2, 1.5, 1.5, 0.9]) == 1.5
    assert max_over_time([-3.0, -1.0]) == -1.0
    with pytest.raises(EmptyMap):
        max_over_time([])


def test_pooling_picks_first_argmax_on_ties():
    # identical windows (all-ones input) make every position tie; pooling
    # and gradient routing must select position 0
    model = init_model(seed=5)
    cache = _forward_batch(model, np.ones((1, REDUCED_ROWS, 13)))
    for arg in cache.argmax:
        assert np.all(arg == 0)


# ---------------------------------------------------------------- gradients

def test_gradient_check_small_sample():
    rng = np.random.default_rng(0)
    for trial in range(3):
        model = init_model(seed=trial)
        x = _random_input(rng)
        label = "affected" if trial % 2 == 0 else "unaffected"
        assert max_gradient_error(model, x, label) < 1e-4


# ----------------------------------------------------------------- training

def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(lr=-1.0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(optimizer="momentum").validate()
    with pytest.raises(ConfigError):
        TrainConfig(lr_decay=0.0).validate()


def test_overfit_single_example():
    rng = np.random.default_rng(6)
    data = [(_random_input(rng), "affected")]
    config = TrainConfig(lr=0.05, epochs=60, batch_size=1, seed=6)
    _model, history = train(data, None, config)
    assert history.train_loss[-1] < 0.01
    assert history.train_accuracy[-1] == 1.0


def test_training_is_deterministic():
    rng = np.random.default_rng(7)
    data = [(_random_input(rng), lab)
            for lab in ("affected", "unaffected") * 4]
    config = TrainConfig(lr=0.01, epochs=5, batch_size=4, seed=7)
    m1, h1 = train(data, None, config)
    m2, h2 = train(data, None, config)
    assert h1.train_loss == h2.train_loss
    for f1, f2 in zip(m1.filters, m2.filters):
        assert np.array_equal(f1.weights, f2.weights)
        assert f1.bias == f2.bias
    assert np.array_equal(m1.dense_w, m2.dense_w)


def test_sgd_optimizer_runs():
    rng = np.random.default_rng(8)
    data = [(_random_input(rng), "unaffected") for _ in range(4)]
    config = TrainConfig(lr=0.01, epochs=2, batch_size=2, optimizer="sgd",
                         seed=8)
    _model, history = train(data, None, config)
    assert len(history.train_loss) == 2


def test_validation_history_tracked():
    rng = np.random.default_rng(9)
    data = [(_random_input(rng), lab)
            for lab in ("affected", "unaffected") * 3]
    _model, history = train(data[:4], data[4:],
                            TrainConfig(epochs=3, seed=9))
    assert len(history.val_loss) == 3
    assert len(history.val_accuracy) == 3


def test_predict_batch_matches_predict():
    model = init_model(seed=10)
    rng = np.random.default_rng(10)
    xs = [_random_input(rng) for _ in range(5)]
    batched = predict_batch(model, xs)
    for x, p in zip(xs, batched):
        assert predict(model, x).p_affected == pytest.approx(p, abs=1e-12)


# ----------------------------------------------------------------- model IO

def test_save_load_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(11)
    data = [(_random_input(rng), lab)
            for lab in ("affected", "unaffected") * 2]
    model, _ = train(data, None, TrainConfig(epochs=2, seed=11,
                                             weight_decay=1e-3,
                                             lr_decay=0.5, bias_init=0.1))
    path = tmp_path / "model.txt"
    save_model(model, path)
    loaded = load_model(path)
    for f1, f2 in zip(model.filters, loaded.filters):
        assert np.array_equal(f1.weights, f2.weights)
        assert f1.bias == f2.bias
    assert np.array_equal(model.dense_w, loaded.dense_w)
    assert np.array_equal(model.dense_b, loaded.dense_b)
    assert loaded.config == model.config
    x = _random_input(rng)
    assert predict(model, x) == predict(loaded, x)


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("not-a-model\n")
    with pytest.raises(FormatVersionError):
        load_model(path)


def test_load_rejects_future_version(tmp_path):
    model = init_model(seed=12)
    path = tmp_path / "model.txt"
    save_model(model, path)
    text = path.read_text().replace("version 1", "version 99", 1)
    path.write_text(text)
    with pytest.raises(FormatVersionError):
        load_model(path)
