import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import striped_digits
from tinysnn import PoissonEncoder, TinySNNClassifier
from tinysnn.fixedpoint import FixedPointFormat
from tinysnn.quantization import QuantConfig

TOY = dict(n_neurons=12, num_steps=60, rate_scale=0.2, v_thresh_base=4.0, w_inh=8.0, norm_target=8.0,
           eta_post=0.01)


@pytest.fixture(scope="module")
def fitted():
    X, y = striped_digits(300, 1)
    Xt, yt = striped_digits(100, 2)
    clf = TinySNNClassifier(**TOY).fit(X.reshape(300, -1), y)
    return clf, Xt.reshape(100, -1), yt


def test_encoder_shapes_and_scaling():
    X = np.array([[0, 255, 128], [255, 0, 0]])
    enc = PoissonEncoder(num_steps=40, rate_scale=1.0, random_state=3).fit(X)
    out = enc.transform(X)
    assert out.shape == (2, 3, 40) and out.dtype == bool
    assert out[0, 1].all() and not out[0, 0].any()
    np.testing.assert_array_equal(out, enc.transform(X / 255.0))
    np.testing.assert_array_equal(out, PoissonEncoder(40, 1.0, 3).fit_transform(X))


def test_encoder_validation():
    enc = PoissonEncoder()
    with pytest.raises(NotFittedError):
        enc.transform(np.zeros((1, 3)))
    enc.fit(np.zeros((1, 3)))
    with pytest.raises(ValueError):
        enc.transform(np.zeros((1, 4)))
    with pytest.raises(ValueError):
        enc.fit(np.array([[np.nan, 0.0]]))
    with pytest.raises(ValueError):
        enc.fit(np.array([[-1.0, 0.0]]))


def test_params_round_trip():
    clf = TinySNNClassifier(**TOY)
    assert clone(clf).get_params() == clf.get_params()
    assert clf.set_params(n_neurons=5).n_neurons == 5


def test_fit_predict(fitted):
    clf, Xt, yt = fitted
    assert clf.classes_.tolist() == list(range(10))
    assert clf.model_.num_excitatory == 12
    assert clf.score(Xt, yt) >= 0.5
    assert clf.spike_counts(Xt[:5]).shape == (5, 12)


def test_fit_is_deterministic(fitted):
    clf, Xt, _ = fitted
    X, y = striped_digits(300, 1)
    again = TinySNNClassifier(**TOY).fit(X.reshape(300, -1), y)
    np.testing.assert_array_equal(again.model_.weights, clf.model_.weights)
    np.testing.assert_array_equal(again.predict(Xt), clf.predict(Xt))


def test_images_as_3d_accepted(fitted):
    clf, Xt, _ = fitted
    np.testing.assert_array_equal(clf.predict(Xt.reshape(-1, 8, 8)), clf.predict(Xt))


def test_quantized_copy(fitted):
    clf, Xt, yt = fitted
    q = clf.quantized(QuantConfig("ptq", "truncate", {"weights": FixedPointFormat(False, 1, 7)}, "qW"))
    assert q.model_.formats["weights"] is not None and clf.model_.formats["weights"] is None
    assert q.score(Xt, yt) >= 0.5 * clf.score(Xt, yt)


def test_fit_validation():
    X = np.zeros((4, 3))
    with pytest.raises(ValueError):
        TinySNNClassifier(**TOY).fit(X, [0, 2, 2, 0])
    with pytest.raises(ValueError):
        TinySNNClassifier(**TOY).fit(X, [0, 1, 1])
    with pytest.raises(NotFittedError):
        TinySNNClassifier().predict(X)
