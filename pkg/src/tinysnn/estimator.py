"""scikit-learn style wrappers around the encoder and the spiking classifier."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .encoding import DEFAULT_NUM_STEPS, DEFAULT_RATE_SCALE, EncodedSamples
from .evaluation import assign_neuron_labels, collect_counts, predict_from_counts
from .learning import LearnConfig, train_network
from .metrics import OpCounts
from .network import LayerParams, NetworkModel
from .quantization import QuantConfig, apply_ptq
from .validation import check_intensities, check_labelled

_layer = LayerParams()


class PoissonEncoder(TransformerMixin, BaseEstimator):
    """Rate-code intensity rows into boolean rasters ``[n_samples, n_inputs, num_steps]``."""

    def __init__(self, num_steps=DEFAULT_NUM_STEPS, rate_scale=DEFAULT_RATE_SCALE, random_state=0):
        self.num_steps = num_steps
        self.rate_scale = rate_scale
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_intensities(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_intensities(X, self.n_features_in_)
        samples = EncodedSamples(X, np.zeros(len(X), dtype=np.int64), self.num_steps, self.rate_scale,
                                 self.random_state)
        return np.stack([samples[i][0].spikes for i in range(len(samples))])


class TinySNNClassifier(ClassifierMixin, BaseEstimator):
    """Unsupervised STDP training followed by spike-count neuron labelling.

    ``fit`` trains one epoch over ``X`` (labels unused), then labels each
    neuron with its most-driving class on a fresh encoding of ``X``.
    ``predict`` takes the class whose labelled neurons spike most on
    average. ``X`` holds flattened images, as bytes or as [0, 1] floats.
    """

    def __init__(self, n_neurons=100, num_steps=DEFAULT_NUM_STEPS, rate_scale=DEFAULT_RATE_SCALE,
                 v_thresh_base=_layer.v_thresh_base, w_inh=_layer.w_inh, theta_inc=_layer.theta_inc,
                 tau_mem=_layer.tau_mem, tau_theta=_layer.tau_theta, t_refrac=_layer.t_refrac,
                 eta_post=0.005, n_th=5, update_period=10, norm_target=50.0, rule="enhanced",
                 init_high=0.3, batch_size=250, random_state=0):
        self.n_neurons = n_neurons
        self.num_steps = num_steps
        self.rate_scale = rate_scale
        self.v_thresh_base = v_thresh_base
        self.w_inh = w_inh
        self.theta_inc = theta_inc
        self.tau_mem = tau_mem
        self.tau_theta = tau_theta
        self.t_refrac = t_refrac
        self.eta_post = eta_post
        self.n_th = n_th
        self.update_period = update_period
        self.norm_target = norm_target
        self.rule = rule
        self.init_high = init_high
        self.batch_size = batch_size
        self.random_state = random_state

    def _encode(self, X, y, stream):
        return EncodedSamples(X, y, self.num_steps, self.rate_scale, (int(self.random_state), stream))

    def fit(self, X, y):
        X, y = check_labelled(X, y)
        self.classes_ = np.unique(y)
        if not np.array_equal(self.classes_, np.arange(len(self.classes_))):
            raise ValueError("class labels must be 0..C-1 with every class present")
        params = LayerParams(v_thresh_base=self.v_thresh_base, tau_mem=self.tau_mem, theta_inc=self.theta_inc,
                             tau_theta=self.tau_theta, t_refrac=self.t_refrac, w_inh=self.w_inh)
        cfg = LearnConfig(eta_post=self.eta_post, n_th=self.n_th, update_period=self.update_period or None,
                          norm_target=self.norm_target or None)
        rng = np.random.default_rng((int(self.random_state), 0))
        model = NetworkModel.initialize(X.shape[1], self.n_neurons, params, cfg.w_max, rng, init_high=self.init_high)
        self.train_ops_ = OpCounts()
        train_network(model, self._encode(X, y, 1), cfg, rule=self.rule, op_counter=self.train_ops_)
        self.model_ = model
        self.n_features_in_ = X.shape[1]
        self.label_map_ = assign_neuron_labels(model, self._encode(X, y, 2), len(self.classes_), self.batch_size)
        return self

    def spike_counts(self, X):
        """Per-neuron spike counts ``[n_samples, n_neurons]`` with learning off."""
        check_is_fitted(self, "model_")
        X = check_intensities(X, self.n_features_in_)
        counts, _ = collect_counts(self.model_, self._encode(X, np.zeros(len(X), dtype=np.int64), 3),
                                   self.batch_size)
        return counts

    def predict(self, X):
        counts = self.spike_counts(X)
        return self.classes_[predict_from_counts(self.label_map_, counts)]

    def quantized(self, config: QuantConfig, rng=None) -> "TinySNNClassifier":
        """Copy with the trained model post-training quantized; labels are kept."""
        check_is_fitted(self, "model_")
        clone = TinySNNClassifier(**self.get_params())
        for attr in ("classes_", "n_features_in_", "label_map_", "train_ops_"):
            setattr(clone, attr, getattr(self, attr))
        clone.model_ = apply_ptq(self.model_, config, rng)
        return clone
