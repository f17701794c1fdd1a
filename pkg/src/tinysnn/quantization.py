"""Post-training and in-training quantization of network parameter groups.

Integer bitwidths come from observed value ranges; fractional bitwidths are
either swept against accuracy or fill the remaining width at a given
precision level.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .evaluation import evaluate_accuracy
from .fixedpoint import FixedPointFormat, RoundingMode, format_name, quantize_group
from .learning import train_network
from .network import GROUPS, NetworkModel, run_inference_batch

GROUP_SETS = {"fp32": (), "qW": ("weights",), "qWN": ("weights", "v_mem", "v_thresh")}


class QuantScheme(str, enum.Enum):
    PTQ = "ptq"
    ITQ = "itq"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ValueError(f"unknown quantization scheme {name!r}; expected 'ptq' or 'itq'") from None


@dataclass
class QuantConfig:
    scheme: QuantScheme = QuantScheme.PTQ
    rounding: RoundingMode = RoundingMode.TRUNCATE
    formats: dict = field(default_factory=dict)
    groups: str = "qW"

    def __post_init__(self):
        self.scheme = QuantScheme.parse(self.scheme)
        self.rounding = RoundingMode.parse(self.rounding)
        if self.groups not in GROUP_SETS:
            raise ValueError(f"unknown group set {self.groups!r}; expected one of {sorted(GROUP_SETS)}")
        formats = {g: self.formats.get(g) for g in GROUPS}
        for g, fmt in formats.items():
            if isinstance(fmt, str):
                formats[g] = fmt = FixedPointFormat.parse(fmt)
            if fmt is not None and not isinstance(fmt, FixedPointFormat):
                raise ValueError(f"invalid format for group {g!r}: {fmt!r}")
        enabled = GROUP_SETS[self.groups]
        for g in GROUPS:
            if g not in enabled and formats[g] is not None:
                raise ValueError(f"group {g!r} is not quantized under {self.groups} but has format {formats[g]}")
            if g in enabled and formats[g] is None:
                raise ValueError(f"group {g!r} needs a format under {self.groups}")
        self.formats = formats

    def tags(self):
        return {g: format_name(self.formats[g]) for g in GROUPS}

    def key(self):
        t = self.tags()
        return (self.scheme.value, self.rounding.value, t["weights"], t["v_mem"], t["v_thresh"])


def reference_config():
    return QuantConfig(QuantScheme.PTQ, RoundingMode.TRUNCATE, {}, "fp32")


def recommended_int_bits(lo, hi) -> int:
    mag = max(abs(lo), abs(hi))
    return max(0, math.ceil(math.log2(mag + 1)))


@dataclass
class GroupRange:
    min: float
    max: float

    @property
    def int_bits(self) -> int:
        return recommended_int_bits(self.min, self.max)

    @property
    def signed(self) -> bool:
        return self.min < 0


@dataclass
class RangeReport:
    groups: dict  # group -> GroupRange

    def __getitem__(self, group):
        return self.groups[group]

    def format_for(self, group, total_bits) -> FixedPointFormat:
        """Format of ``total_bits`` width: integer part from the range, rest fractional.

        If the range needs more integer bits than fit, the integer part takes
        the whole width (values above it saturate).
        """
        r = self.groups[group]
        sign = int(r.signed)
        if total_bits <= sign:
            raise ValueError(f"{total_bits} bits cannot hold a signed value")
        int_bits = min(r.int_bits, total_bits - sign)
        return FixedPointFormat(r.signed, int_bits, total_bits - sign - int_bits)

    def config_for(self, scheme, rounding, total_bits, groups) -> QuantConfig:
        formats = {g: self.format_for(g, total_bits) for g in GROUP_SETS[groups]}
        return QuantConfig(scheme, rounding, formats, groups)

    def as_rows(self):
        return [(g, r.min, r.max, r.int_bits) for g, r in self.groups.items()]


def observe_ranges(model: NetworkModel, calibration_samples, batch_size=250) -> RangeReport:
    """Record value ranges of each parameter group.

    Weights are read statically; membrane potentials are tracked at every
    step of inference over the calibration samples; thresholds are the
    frozen effective thresholds used during that inference.
    """
    lo, hi = [math.inf], [-math.inf]

    def monitor(v):
        lo[0] = min(lo[0], float(v.min()))
        hi[0] = max(hi[0], float(v.max()))

    n = 0
    batch = []
    for train, _label in calibration_samples:
        batch.append(train.spikes)
        n += 1
        if len(batch) == batch_size:
            run_inference_batch(model, np.stack(batch), monitor=monitor)
            batch = []
    if batch:
        run_inference_batch(model, np.stack(batch), monitor=monitor)
    if n == 0:
        raise ValueError("range observation needs at least one calibration sample")
    vth = model.v_thresh
    return RangeReport({
        "weights": GroupRange(float(model.weights.min()), float(model.weights.max())),
        "v_mem": GroupRange(min(lo[0], model.params.v_reset), max(hi[0], model.params.v_rest)),
        "v_thresh": GroupRange(float(vth.min()), float(vth.max())),
    })


def _quantize_constants(model: NetworkModel, formats):
    """Snap per-layer constants onto their group grid (round to nearest)."""
    p = model.params
    vfmt, tfmt = formats.get("v_mem"), formats.get("v_thresh")
    if vfmt is not None:
        p.v_rest = float(quantize_group(p.v_rest, vfmt, RoundingMode.NEAREST))
        p.v_reset = float(quantize_group(p.v_reset, vfmt, RoundingMode.NEAREST))
        p.w_inh = float(quantize_group(p.w_inh, vfmt, RoundingMode.NEAREST))
    if tfmt is not None:
        p.v_thresh_base = float(quantize_group(p.v_thresh_base, tfmt, RoundingMode.NEAREST))
        p.theta_inc = float(quantize_group(p.theta_inc, tfmt, RoundingMode.NEAREST))
        p.v_reset = min(p.v_reset, p.v_thresh_base)


def quantize_groups(model: NetworkModel, formats, mode, rng=None) -> NetworkModel:
    """Copy of ``model`` with each group in ``formats`` snapped to its format.

    Groups absent from ``formats`` keep the model's current format.
    """
    q = model.copy()
    if formats.get("weights") is not None:
        q.weights = np.clip(quantize_group(q.weights, formats["weights"], mode, rng), 0.0, q.w_max)
    if formats.get("v_thresh") is not None:
        eff = quantize_group(model.v_thresh, formats["v_thresh"], mode, rng)
    _quantize_constants(q, formats)
    if formats.get("v_mem") is not None:
        q.v_mem = quantize_group(q.v_mem, formats["v_mem"], mode, rng)
    if formats.get("v_thresh") is not None:
        q.theta = np.maximum(eff - q.params.v_thresh_base, 0.0)
    q.formats = {g: formats[g] if g in formats else model.formats[g] for g in GROUPS}
    return q


def quantize_model(model: NetworkModel, config: QuantConfig, rng=None) -> NetworkModel:
    q = quantize_groups(model, config.formats, config.rounding, rng)
    if config.groups != "fp32":
        q.lineage = dict(model.lineage, quant={"scheme": config.scheme.value, "rounding": config.rounding.value,
                                               **config.tags()})
    return q


def apply_ptq(model: NetworkModel, config: QuantConfig, rng=None) -> NetworkModel:
    """Quantize a trained model; the input model is not modified."""
    if config.scheme is not QuantScheme.PTQ:
        raise ValueError("apply_ptq needs a PTQ configuration")
    if config.rounding is RoundingMode.STOCHASTIC and rng is None:
        raise ValueError("stochastic rounding requires a seeded random generator")
    return quantize_model(model, config, rng)


def train_itq(initial_model: NetworkModel, training_stream, learn_cfg, quant_cfg: QuantConfig, rng=None,
              op_counter=None, rule="enhanced") -> NetworkModel:
    """Train with enabled groups held on their grids throughout.

    Weights are re-quantized after every update and every normalization;
    membrane potentials and thresholds are kept on grid by the layer step.
    """
    if quant_cfg.scheme is not QuantScheme.ITQ:
        raise ValueError("train_itq needs an ITQ configuration")
    if quant_cfg.rounding is RoundingMode.STOCHASTIC and rng is None:
        raise ValueError("stochastic rounding requires a seeded random generator")
    model = quantize_model(initial_model, quant_cfg, rng)
    wfmt = quant_cfg.formats["weights"]
    after_update = None
    if wfmt is not None:
        def after_update(m):
            m.weights = np.clip(quantize_group(m.weights, wfmt, quant_cfg.rounding, rng), 0.0, m.w_max)
    return train_network(model, training_stream, learn_cfg, rule=rule, op_counter=op_counter,
                         after_update=after_update)


def sweep_fractional_bits(model: NetworkModel, label_map, eval_set, group, candidate_frac_bits, rounding,
                          int_bits=None, signed=None, rng=None, batch_size=250):
    """Accuracy for each fractional width of one group, other groups untouched.

    Returns a list of ``(frac_bits, accuracy)`` rows, one per candidate, in
    the given order. The label map is the reference model's.
    """
    if group not in GROUPS:
        raise ValueError(f"unknown parameter group {group!r}")
    candidate_frac_bits = list(candidate_frac_bits)
    if not candidate_frac_bits:
        raise ValueError("no fractional bitwidth candidates given")
    if not hasattr(eval_set, "__len__"):
        eval_set = list(eval_set)
    if int_bits is None or signed is None:
        r = observe_ranges(model, eval_set, batch_size)[group]
        int_bits = r.int_bits if int_bits is None else int_bits
        signed = r.signed if signed is None else signed
    rows = []
    mode = RoundingMode.parse(rounding)
    for f in candidate_frac_bits:
        q = quantize_groups(model, {group: FixedPointFormat(signed, int_bits, f)}, mode, rng)
        rows.append((f, evaluate_accuracy(q, label_map, eval_set, batch_size)))
    return rows

