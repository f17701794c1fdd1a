"""STDP rules: the timestep-based rule with adaptive potentiation and the
pair-wise baseline rule.

The adaptive rule applies, at each update time,

    dw = k * eta_post * x_pre * (w_max - w),    k = ceil(maxN / n_th)

to the incoming weights of every neuron that spiked in the current update
window, where maxN is the largest per-neuron spike count seen so far in the
presentation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .metrics import OpCounts
from .network import NetworkModel, present_sample

log = logging.getLogger(__name__)


@dataclass
class TraceState:
    x_pre: np.ndarray
    tau_pre: float = 20.0

    def __post_init__(self):
        if self.tau_pre <= 0:
            raise ValueError("tau_pre must be positive")
        self.x_pre = np.asarray(self.x_pre, dtype=np.float64)

    @classmethod
    def zeros(cls, num_inputs, tau_pre=20.0):
        return cls(np.zeros(num_inputs), tau_pre)


@dataclass
class LearnConfig:
    eta_post: float = 0.01
    w_max: float = 1.0
    n_th: int = 5
    update_period: int = None  # None -> one update at the end of the window
    tau_pre: float = 20.0
    trace_set_to_one: bool = True
    x_tar: float = 0.4  # pair-wise rule only
    norm_target: float = None  # per-sample column normalization, off when None

    def __post_init__(self):
        if self.eta_post <= 0 or self.w_max <= 0:
            raise ValueError("eta_post and w_max must be positive")
        if self.n_th < 1:
            raise ValueError("n_th must be at least 1")
        if self.update_period is not None and self.update_period < 1:
            raise ValueError("update_period must be at least 1")
        if self.tau_pre <= 0:
            raise ValueError("tau_pre must be positive")
        if self.norm_target is not None and self.norm_target <= 0:
            raise ValueError("norm_target must be positive")


@dataclass
class SpikeStats:
    counts: np.ndarray

    @property
    def max_n(self) -> int:
        return int(self.counts.max()) if self.counts.size else 0


def update_traces(traces: TraceState, input_spikes_t, set_to_one=True):
    s = np.asarray(input_spikes_t, dtype=bool)
    if s.shape != traces.x_pre.shape:
        raise ValueError(f"spike vector has shape {s.shape}, traces have {traces.x_pre.shape}")
    traces.x_pre *= math.exp(-1.0 / traces.tau_pre)
    if set_to_one:
        traces.x_pre[s] = 1.0
    else:
        traces.x_pre[s] = np.minimum(traces.x_pre[s] + 1.0, 1.0)


def compute_k(max_n, n_th) -> int:
    if n_th < 1:
        raise ValueError("n_th must be at least 1")
    if max_n < 0:
        raise ValueError("maxN must be non-negative")
    return -(-int(max_n) // int(n_th))


def enhanced_stdp_update(weights, traces: TraceState, stats: SpikeStats, window_spiked, cfg: LearnConfig) -> int:
    """Potentiate the columns of neurons that spiked in the window, in place.

    Returns the number of synapses updated.
    """
    window_spiked = np.asarray(window_spiked, dtype=bool)
    n_in, n_out = weights.shape
    if window_spiked.shape != (n_out,) or traces.x_pre.shape != (n_in,):
        raise ValueError("dimension mismatch between weights, traces and spike flags")
    k = compute_k(stats.max_n, cfg.n_th)
    if k * cfg.eta_post > 1.0:
        raise ValueError(f"k * eta_post = {k * cfg.eta_post} exceeds 1; weights would overshoot w_max")
    cols = np.flatnonzero(window_spiked)
    if k == 0 or cols.size == 0:
        return 0
    w = weights[:, cols]
    w += (k * cfg.eta_post) * traces.x_pre[:, None] * (cfg.w_max - w)
    weights[:, cols] = np.clip(w, 0.0, cfg.w_max)
    return n_in * cols.size


def pairwise_stdp_update(weights, traces: TraceState, post_spikes_t, cfg: LearnConfig) -> int:
    post = np.asarray(post_spikes_t, dtype=bool)
    n_in, n_out = weights.shape
    if post.shape != (n_out,) or traces.x_pre.shape != (n_in,):
        raise ValueError("dimension mismatch between weights, traces and spike flags")
    cols = np.flatnonzero(post)
    if cols.size == 0:
        return 0
    w = weights[:, cols]
    w += cfg.eta_post * (traces.x_pre - cfg.x_tar)[:, None] * (cfg.w_max - w)
    weights[:, cols] = np.clip(w, 0.0, cfg.w_max)
    return n_in * cols.size


def normalize_input_weights(weights, target_sum, w_max=None):
    """Scale each neuron's incoming column to sum to ``target_sum``.

    Zero columns are left alone. With ``w_max`` given, the result is clipped
    to ``[0, w_max]`` afterwards, so a column whose mass is concentrated on
    few inputs can end up summing to less than the target.
    """
    if target_sum <= 0:
        raise ValueError("target_sum must be positive")
    sums = weights.sum(axis=0)
    nz = sums > 0
    weights[:, nz] *= target_sum / sums[nz]
    if w_max is not None:
        np.clip(weights, 0.0, w_max, out=weights)


class EnhancedSTDP:
    """Learning hook for ``present_sample`` running the adaptive rule.

    ``after_update`` (if given) is called with the model after every weight
    update; in-training quantization uses it to snap weights back on grid.
    """

    def __init__(self, cfg: LearnConfig, after_update=None):
        self.cfg = cfg
        self.after_update = after_update
        self.traces = None
        self.stats = None
        self.window = None
        self.updates = 0
        self.k_history = []

    def begin(self, model, num_steps):
        self.traces = TraceState.zeros(model.num_inputs, self.cfg.tau_pre)
        self.stats = SpikeStats(np.zeros(model.num_excitatory, dtype=np.int64))
        self.window = np.zeros(model.num_excitatory, dtype=bool)
        self.period = self.cfg.update_period or max(num_steps, 1)
        self.num_steps = num_steps

    def after_step(self, model, t, input_spikes, fired, op_counter=None):
        update_traces(self.traces, input_spikes, self.cfg.trace_set_to_one)
        self.stats.counts += fired
        self.window |= fired
        if (t + 1) % self.period == 0 or t + 1 == self.num_steps:
            self._update(model, op_counter)

    def _update(self, model, op_counter):
        self.k_history.append(compute_k(self.stats.max_n, self.cfg.n_th))
        n = enhanced_stdp_update(model.weights, self.traces, self.stats, self.window, self.cfg)
        self.updates += 1
        if op_counter is not None:
            op_counter.learning_updates += n
        if n and self.after_update is not None:
            self.after_update(model)
        self.window[:] = False

    def end(self, model, op_counter=None):
        pass


class PairwiseSTDP:
    """Baseline hook: pair-wise potentiation on every postsynaptic spike."""

    def __init__(self, cfg: LearnConfig, after_update=None):
        self.cfg = cfg
        self.after_update = after_update

    def begin(self, model, num_steps):
        self.traces = TraceState.zeros(model.num_inputs, self.cfg.tau_pre)

    def after_step(self, model, t, input_spikes, fired, op_counter=None):
        update_traces(self.traces, input_spikes, self.cfg.trace_set_to_one)
        n = pairwise_stdp_update(model.weights, self.traces, fired, self.cfg)
        if op_counter is not None:
            op_counter.learning_updates += n
        if n and self.after_update is not None:
            self.after_update(model)

    def end(self, model, op_counter=None):
        pass


def train_network(model: NetworkModel, samples, cfg: LearnConfig, rule="enhanced", op_counter=None,
                  after_update=None, progress_every=0) -> NetworkModel:
    """One pass of unsupervised training over ``samples`` (in place).

    ``samples`` yields ``(SpikeTrain, label)`` pairs; labels are ignored.
    Column normalization (if configured) runs after each sample, followed by
    ``after_update``.
    """
    if cfg.w_max != model.w_max:
        raise ValueError(f"learning w_max {cfg.w_max} differs from model w_max {model.w_max}")
    hook_cls = {"enhanced": EnhancedSTDP, "pairwise": PairwiseSTDP}[rule]
    hook = hook_cls(cfg, after_update)
    for i, (train, _label) in enumerate(samples):
        present_sample(model, train, hook, op_counter, adapt=True)
        if cfg.norm_target is not None:
            normalize_input_weights(model.weights, cfg.norm_target, cfg.w_max)
            if after_update is not None:
                after_update(model)
        if progress_every and (i + 1) % progress_every == 0:
            log.info("trained %d samples, mean theta %.4f", i + 1, float(model.theta.mean()))
    return model
