"""Excitatory LIF layer with direct lateral inhibition and adaptive thresholds.

There is no inhibitory population: every excitatory spike subtracts
``w_inh`` from the membrane potential of every other (non-firing) neuron.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .fixedpoint import RoundingMode, format_name, quantize_group
from .metrics import OpCounts

GROUPS = ("weights", "v_mem", "v_thresh")


@dataclass
class LayerParams:
    v_rest: float = 0.0
    v_reset: float = 0.0
    v_thresh_base: float = 20.0
    tau_mem: float = 100.0
    theta_inc: float = 0.5
    tau_theta: float = 1e5
    t_refrac: int = 5
    w_inh: float = 60.0

    def __post_init__(self):
        if self.tau_mem <= 0 or self.tau_theta <= 0:
            raise ValueError("time constants must be positive")
        if self.w_inh < 0:
            raise ValueError("w_inh must be non-negative")
        if self.v_reset > self.v_thresh_base:
            raise ValueError("v_reset must not exceed v_thresh_base")
        if self.t_refrac < 0 or int(self.t_refrac) != self.t_refrac:
            raise ValueError("t_refrac must be a non-negative integer")
        self.t_refrac = int(self.t_refrac)


@dataclass
class NeuronDynamicState:
    v_mem: float
    theta: float
    refrac_remaining: int


@dataclass
class NetworkModel:
    """Input-to-excitatory weights plus per-neuron state.

    Neuron state is held as parallel arrays (``v_mem``, ``theta``,
    ``refrac``); ``neuron_state(j)`` gives the per-neuron view.
    ``formats`` maps each parameter group to a ``FixedPointFormat`` or
    ``None`` for the fp32 reference.
    """

    weights: np.ndarray
    params: LayerParams = field(default_factory=LayerParams)
    w_max: float = 1.0
    v_mem: np.ndarray = None
    theta: np.ndarray = None
    refrac: np.ndarray = None
    formats: dict = field(default_factory=dict)
    lineage: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be a [num_inputs x num_excitatory] matrix")
        if self.w_max <= 0:
            raise ValueError("w_max must be positive")
        n = self.num_excitatory
        if self.v_mem is None:
            self.v_mem = np.full(n, self.params.v_rest)
        if self.theta is None:
            self.theta = np.zeros(n)
        if self.refrac is None:
            self.refrac = np.zeros(n, dtype=np.int64)
        self.v_mem = np.array(self.v_mem, dtype=np.float64)
        self.theta = np.array(self.theta, dtype=np.float64)
        self.refrac = np.array(self.refrac, dtype=np.int64)
        for arr in (self.v_mem, self.theta, self.refrac):
            if arr.shape != (n,):
                raise ValueError(f"neuron state arrays must have shape ({n},)")
        unknown = set(self.formats) - set(GROUPS)
        if unknown:
            raise ValueError(f"unknown parameter groups {sorted(unknown)}")
        self.formats = {g: self.formats.get(g) for g in GROUPS}

    @classmethod
    def initialize(cls, num_inputs, num_excitatory, params=None, w_max=1.0, rng=None, init_low=0.0, init_high=0.3):
        if rng is None:
            raise ValueError("weight initialization requires a seeded random generator")
        weights = rng.uniform(init_low, init_high, size=(num_inputs, num_excitatory))
        return cls(np.clip(weights, 0.0, w_max), params or LayerParams(), w_max)

    @property
    def num_inputs(self) -> int:
        return self.weights.shape[0]

    @property
    def num_excitatory(self) -> int:
        return self.weights.shape[1]

    @property
    def v_thresh(self) -> np.ndarray:
        return self.params.v_thresh_base + self.theta

    def neuron_state(self, j) -> NeuronDynamicState:
        return NeuronDynamicState(float(self.v_mem[j]), float(self.theta[j]), int(self.refrac[j]))

    def copy(self) -> "NetworkModel":
        return copy.deepcopy(self)

    def format_tags(self) -> dict:
        return {g: format_name(self.formats[g]) for g in GROUPS}

    def requantize_thresholds(self):
        """Put the effective threshold back on the ``v_thresh`` grid."""
        fmt = self.formats["v_thresh"]
        if fmt is None:
            return
        eff = quantize_group(self.v_thresh, fmt, RoundingMode.NEAREST)
        self.theta = np.maximum(eff - self.params.v_thresh_base, 0.0)


def reset_dynamic_state(model: NetworkModel):
    """Membrane back to rest, refractory counters cleared; theta is kept."""
    model.v_mem[:] = model.params.v_rest
    if model.formats["v_mem"] is not None:
        model.v_mem[:] = quantize_group(model.v_mem, model.formats["v_mem"], RoundingMode.TRUNCATE)
    model.refrac[:] = 0


def _inhibit(v, fired, n_fired, w_inh, v_reset):
    # never pushes below v_reset and never raises a potential already under it
    inhibited = np.maximum(v - w_inh * n_fired, np.minimum(v, v_reset))
    return np.where(fired, v, inhibited)


def step_layer(model: NetworkModel, input_spikes_t, op_counter: OpCounts = None, adapt=True) -> np.ndarray:
    """Advance the layer one timestep and return the excitatory spike vector.

    Per neuron: refractory neurons count down without integrating; others
    leak toward ``v_rest`` and add the weights of spiking inputs. Theta
    decays, neurons at or above ``v_thresh_base + theta`` fire and reset.
    Once all firings are known, each non-firing neuron loses ``w_inh`` per
    firing neuron, floored at ``v_reset``. ``adapt=False`` freezes theta.
    """
    s = np.asarray(input_spikes_t)
    if s.shape != (model.num_inputs,):
        raise ValueError(f"input spike vector has shape {s.shape}, expected ({model.num_inputs},)")
    p = model.params
    v = model.v_mem
    active = model.refrac == 0
    model.refrac[~active] -= 1

    idx = np.flatnonzero(s)
    if idx.size:
        drive = model.weights[idx].sum(axis=0)
        v[active] = v[active] + (p.v_rest - v[active]) / p.tau_mem + drive[active]
    else:
        v[active] = v[active] + (p.v_rest - v[active]) / p.tau_mem

    if adapt:
        model.theta *= 1.0 - 1.0 / p.tau_theta
    fired = active & (v >= p.v_thresh_base + model.theta)
    n_fired = int(fired.sum())
    if n_fired:
        v[fired] = p.v_reset
        if adapt:
            model.theta[fired] += p.theta_inc
        model.refrac[fired] = p.t_refrac
        if p.w_inh > 0:
            v[:] = _inhibit(v, fired, n_fired, p.w_inh, p.v_reset)

    if model.formats["v_mem"] is not None:
        v[:] = quantize_group(v, model.formats["v_mem"], RoundingMode.TRUNCATE)
    if adapt:
        model.requantize_thresholds()

    if op_counter is not None:
        e = model.num_excitatory
        op_counter.synaptic_accumulates += idx.size * int(active.sum())
        op_counter.neuron_updates += e
        op_counter.inhibition_events += n_fired * (e - n_fired)
        op_counter.spikes += n_fired
    return fired


def present_sample(model: NetworkModel, spike_train, learning=None, op_counter: OpCounts = None, adapt=True) -> np.ndarray:
    """Show one sample for its full window and return per-neuron spike counts.

    Dynamic state is reset before the window; theta carries over. The
    optional ``learning`` hook receives ``begin``, ``after_step`` and
    ``end`` calls.
    """
    if spike_train.num_inputs != model.num_inputs:
        raise ValueError(f"spike train has {spike_train.num_inputs} inputs, model expects {model.num_inputs}")
    reset_dynamic_state(model)
    counts = np.zeros(model.num_excitatory, dtype=np.int64)
    raster = np.ascontiguousarray(spike_train.spikes.T)
    if learning is not None:
        learning.begin(model, raster.shape[0])
    for t in range(raster.shape[0]):
        fired = step_layer(model, raster[t], op_counter, adapt=adapt)
        counts += fired
        if learning is not None:
            learning.after_step(model, t, raster[t], fired, op_counter)
    if learning is not None:
        learning.end(model, op_counter)
    return counts


def run_inference_batch(model: NetworkModel, rasters, op_counter: OpCounts = None, monitor=None) -> np.ndarray:
    """Inference over a batch of rasters ``[batch, inputs, steps]`` with theta frozen.

    Samples are independent (state is reset per sample and theta does not
    adapt), so they are simulated side by side. Returns counts ``[batch, E]``.
    The model's own dynamic state is left untouched. ``monitor``, if given,
    is called with the potentials after integration and again after
    firing/inhibition at every step.
    """
    rasters = np.asarray(rasters, dtype=np.bool_)
    b, n_in, steps = rasters.shape
    if n_in != model.num_inputs:
        raise ValueError(f"rasters have {n_in} inputs, model expects {model.num_inputs}")
    p = model.params
    e = model.num_excitatory
    vfmt = model.formats["v_mem"]
    thresh = p.v_thresh_base + model.theta
    v = np.full((b, e), p.v_rest)
    if vfmt is not None:
        v = quantize_group(v, vfmt, RoundingMode.TRUNCATE)
    refrac = np.zeros((b, e), dtype=np.int64)
    counts = np.zeros((b, e), dtype=np.int64)
    w = model.weights
    syn = inh = spikes = 0
    for t in range(steps):
        s = rasters[:, :, t]
        active = refrac == 0
        refrac[~active] -= 1
        drive = s.astype(np.float64) @ w
        v = np.where(active, v + (p.v_rest - v) / p.tau_mem + drive, v)
        if monitor is not None:
            monitor(v)
        fired = active & (v >= thresh)
        n_fired = fired.sum(axis=1)
        if n_fired.any():
            v[fired] = p.v_reset
            refrac[fired] = p.t_refrac
            if p.w_inh > 0:
                nf = n_fired[:, None]
                inhibited = np.maximum(v - p.w_inh * nf, np.minimum(v, p.v_reset))
                v = np.where(fired | (nf == 0), v, inhibited)
        if vfmt is not None:
            v = quantize_group(v, vfmt, RoundingMode.TRUNCATE)
        if monitor is not None:
            monitor(v)
        counts += fired
        if op_counter is not None:
            syn += int((s.sum(axis=1) * active.sum(axis=1)).sum())
            inh += int((n_fired * (e - n_fired)).sum())
            spikes += int(n_fired.sum())
    if op_counter is not None:
        op_counter.synaptic_accumulates += syn
        op_counter.neuron_updates += b * steps * e
        op_counter.inhibition_events += inh
        op_counter.spikes += spikes
    return counts
