import math

import numpy as np
import pytest

from phm.errors import FormatError, ShapeError
from phm.model import TinyClassifier, classifier_backward, classifier_forward, cross_entropy, load_model, save_model

from oracles import classifier_fd_check, naive_classifier


@pytest.fixture
def model():
    return TinyClassifier(10, 32, rng=np.random.default_rng(0))


def bias_only(k=10, size=32):
    m = TinyClassifier(k, size)
    m.params["fc.bias"][:] = np.arange(k) * 0.1 - 0.3
    return m


def test_zero_model_zero_logits():
    logits, _ = classifier_forward(np.zeros((3, 32, 32)), TinyClassifier(10))
    assert logits.shape == (10,) and not logits.any()


def test_bias_only_model():
    m = bias_only()
    x = np.random.default_rng(1).random((3, 32, 32))
    logits, _ = classifier_forward(x, m)
    np.testing.assert_array_equal(logits, m.params["fc.bias"])


def test_forward_matches_loop_oracle():
    rng = np.random.default_rng(2)
    m = TinyClassifier(5, 8, rng=rng)
    for _ in range(3):
        x = rng.random((3, 8, 8))
        logits, _ = classifier_forward(x, m)
        np.testing.assert_allclose(logits, naive_classifier(x, m.params), rtol=0, atol=1e-6)


def test_forward_full_size_matches_oracle_once(model):
    x = np.random.default_rng(3).random((3, 32, 32))
    np.testing.assert_allclose(classifier_forward(x, model)[0], naive_classifier(x, model.params), atol=1e-6)


def test_batch_matches_single(model):
    x = np.random.default_rng(4).random((4, 3, 32, 32))
    batch, _ = classifier_forward(x, model)
    for i in range(4):
        np.testing.assert_allclose(batch[i], classifier_forward(x[i], model)[0], rtol=1e-12, atol=1e-12)


def test_forward_shape_error(model):
    with pytest.raises(ShapeError):
        classifier_forward(np.zeros((3, 16, 16)), model)


def test_zero_grad_logits(model):
    _, cache = classifier_forward(np.random.default_rng(5).random((3, 32, 32)), model)
    grads, gx = classifier_backward(np.zeros(10), cache, model)
    assert all(not g.any() for g in grads.values())
    assert not gx.any()


def test_bias_only_gradients():
    m = bias_only()
    _, cache = classifier_forward(np.random.default_rng(6).random((3, 32, 32)), m)
    g = np.zeros(10)
    g[3] = 1.0
    grads, _ = classifier_backward(g, cache, m)
    np.testing.assert_array_equal(grads["fc.bias"], g)
    for name in ("conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias"):
        assert not grads[name].any()


def test_stale_cache(model):
    x = np.random.default_rng(7).random((3, 32, 32))
    _, old = classifier_forward(x, model)
    classifier_forward(x, model)
    with pytest.raises(RuntimeError, match="stale"):
        classifier_backward(np.zeros(10), old, model)


def test_finite_differences_small_eps():
    # at eps=1e-6 ReLU kinks are essentially never crossed, so every parameter is checked
    rng = np.random.default_rng(8)
    m = TinyClassifier(4, 8, rng=rng)
    x = rng.random((2, 3, 8, 8))
    worst, compared, kinks = classifier_fd_check(m, x, np.array([1, 3]), eps=1e-6)
    assert kinks == 0
    assert worst < 1e-4


def test_input_gradient_finite_differences():
    rng = np.random.default_rng(9)
    m = TinyClassifier(4, 8, rng=rng)
    x = rng.random((3, 8, 8))
    logits, cache = classifier_forward(x, m)
    _, g = cross_entropy(logits, 2)
    _, gx = classifier_backward(g, cache, m)
    eps = 1e-6
    for idx in [(0, 0, 0), (1, 3, 4), (2, 7, 7), (0, 5, 2)]:
        x[idx] += eps
        fp = cross_entropy(classifier_forward(x, m)[0], 2)[0]
        x[idx] -= 2 * eps
        fm = cross_entropy(classifier_forward(x, m)[0], 2)[0]
        x[idx] += eps
        assert gx[idx] == pytest.approx((fp - fm) / (2 * eps), rel=1e-5, abs=1e-9)


def test_cross_entropy_values():
    loss, grad = cross_entropy(np.zeros(10), 4)
    assert loss == pytest.approx(math.log(10), abs=1e-12)
    logits = np.zeros(10)
    logits[2] = 50.0
    loss, grad = cross_entropy(logits, 2)
    assert loss < 1e-20 and abs(grad[2]) < 1e-20
    loss, _ = cross_entropy(np.array([1.0, 2.0, 3.0]), 0)
    assert loss == pytest.approx(-1 + math.log(math.e + math.e ** 2 + math.e ** 3), abs=1e-12)
    assert loss == pytest.approx(2.407606, abs=1e-6)


def test_cross_entropy_gradient_and_batch():
    rng = np.random.default_rng(10)
    logits = rng.standard_normal((4, 6)) * 3
    labels = np.array([0, 5, 2, 2])
    losses, grads = cross_entropy(logits, labels)
    for i in range(4):
        li, gi = cross_entropy(logits[i], labels[i])
        assert losses[i] == pytest.approx(li)
        np.testing.assert_allclose(grads[i], gi)
        assert grads[i].sum() == pytest.approx(0.0, abs=1e-12)


def test_cross_entropy_no_overflow():
    loss, grad = cross_entropy(np.array([1000.0, -1000.0]), 1)
    assert loss == pytest.approx(2000.0)
    assert np.all(np.isfinite(grad))


def test_cross_entropy_bad_label():
    with pytest.raises(IndexError):
        cross_entropy(np.zeros(3), 3)


def test_model_file_round_trip(tmp_path, model):
    save_model(model, tmp_path / "m.tcn1")
    text = (tmp_path / "m.tcn1").read_text().splitlines()
    assert text[0] == "TCN1 10"
    assert len(text) == 1 + 8 * 27 + 8 + 16 * 72 + 16 + 10 * 16 + 10
    back = load_model(tmp_path / "m.tcn1")
    for k, v in model.params.items():
        np.testing.assert_array_equal(back.params[k], v)


def test_model_file_errors(tmp_path):
    (tmp_path / "bad.tcn1").write_text("TCN2 10\n")
    with pytest.raises(FormatError):
        load_model(tmp_path / "bad.tcn1")
    (tmp_path / "short.tcn1").write_text("TCN1 2\n0.0\n")
    with pytest.raises(FormatError, match="expected"):
        load_model(tmp_path / "short.tcn1")


def test_init_bounds():
    m = TinyClassifier(10, rng=np.random.default_rng(0))
    assert np.abs(m.params["conv1.weight"]).max() <= math.sqrt(1 / 27)
    assert np.abs(m.params["conv2.bias"]).max() <= math.sqrt(1 / 72)
    assert np.abs(m.params["fc.weight"]).max() <= math.sqrt(1 / 16)
