"""Memory footprint, operation counts and the energy model."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields

from .fixedpoint import format_width

# Per-layer constants stored once each: v_rest, v_reset, v_thresh_base,
# tau_mem, theta_inc, tau_theta, t_refrac, w_inh.
LAYER_CONSTANTS = ("v_rest", "v_reset", "v_thresh_base", "tau_mem", "theta_inc", "tau_theta", "t_refrac", "w_inh")
# Constants that belong to a quantizable group and follow its format.
CONSTANT_GROUP = {"v_rest": "v_mem", "v_reset": "v_mem", "w_inh": "v_mem", "v_thresh_base": "v_thresh", "theta_inc": "v_thresh"}


@dataclass
class ParameterInventory:
    num_weights: int
    weight_bits: int
    neuron_param_entries: list = field(default_factory=list)  # (name, count, bits)

    def __post_init__(self):
        if self.num_weights < 0 or self.weight_bits < 0:
            raise ValueError("inventory counts and widths must be non-negative")
        for name, count, bits in self.neuron_param_entries:
            if count <= 0 or bits <= 0:
                raise ValueError(f"inventory entry {name!r} needs positive count and width")

    def __add__(self, other):
        if self.num_weights and other.num_weights and self.weight_bits != other.weight_bits:
            raise ValueError("cannot concatenate inventories with different weight widths")
        return ParameterInventory(
            self.num_weights + other.num_weights,
            self.weight_bits or other.weight_bits,
            list(self.neuron_param_entries) + list(other.neuron_param_entries),
        )

    def describe(self) -> str:
        lines = [f"weights: {self.num_weights} x {self.weight_bits} bit"]
        lines += [f"{name}: {count} x {bits} bit" for name, count, bits in self.neuron_param_entries]
        lines.append(f"total: {memory_footprint(self)} bit")
        return "\n".join(lines)


def memory_footprint(inv: ParameterInventory) -> int:
    """Total bits: weights plus every neuron-parameter entry."""
    total = int(inv.num_weights) * int(inv.weight_bits)
    for _name, count, bits in inv.neuron_param_entries:
        total += int(count) * int(bits)
    return total


def normalized_memory(m_q, m_0) -> float:
    if m_0 <= 0:
        raise ValueError("reference memory M_0 must be positive")
    return m_q / m_0


def model_inventory(num_inputs, num_excitatory, formats=None, include_constants=True) -> ParameterInventory:
    """Inventory of the reduced (no inhibitory layer) network.

    Each excitatory neuron stores ``v_mem`` and ``theta``; ``theta`` is
    accounted under the ``v_thresh`` group format.
    """
    formats = formats or {}
    wbits = format_width(formats.get("weights"))
    entries = [
        ("v_mem", num_excitatory, format_width(formats.get("v_mem"))),
        ("theta", num_excitatory, format_width(formats.get("v_thresh"))),
    ]
    if include_constants:
        for name in LAYER_CONSTANTS:
            group = CONSTANT_GROUP.get(name)
            entries.append((name, 1, format_width(formats.get(group)) if group else 32))
    return ParameterInventory(num_inputs * num_excitatory, wbits, entries)


def baseline_inventory(num_inputs, num_excitatory, bitwidth=32, include_constants=True) -> ParameterInventory:
    """Inventory of the same network with a paired inhibitory layer.

    Synapses: input->exc all-to-all, exc->inh one-to-one, inh->exc all-but-self.
    """
    if num_inputs <= 0 or num_excitatory <= 0:
        raise ValueError("topology counts must be positive")
    e = num_excitatory
    nw = num_inputs * e + e + e * (e - 1)
    entries = [("v_mem", 2 * e, bitwidth), ("theta", 2 * e, bitwidth)]
    if include_constants:
        # one set of layer constants per population
        entries += [(f"{name}[exc]", 1, bitwidth) for name in LAYER_CONSTANTS]
        entries += [(f"{name}[inh]", 1, bitwidth) for name in LAYER_CONSTANTS]
    return ParameterInventory(nw, bitwidth, entries)


@dataclass
class OpCounts:
    """Additive operation tallies from a simulation run.

    ``spikes`` counts excitatory output spikes; the baseline-topology
    estimate derives its inhibitory-layer traffic from it.
    """

    synaptic_accumulates: int = 0
    neuron_updates: int = 0
    learning_updates: int = 0
    inhibition_events: int = 0
    spikes: int = 0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")

    def __add__(self, other):
        return OpCounts(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})

    def __iadd__(self, other):
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))
        return self

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def baseline_op_counts(ops: OpCounts, num_inputs, num_excitatory, num_steps_total, training) -> OpCounts:
    """Op tallies the paired-inhibitory topology would need for the same run.

    The inhibitory layer adds one neuron update per inhibitory neuron per
    step, one exc->inh event per excitatory spike and ``E - 1`` inh->exc
    accumulates per inhibitory spike (one inhibitory spike per excitatory
    spike). Direct inhibition events disappear. During training the
    baseline uses pair-wise STDP, updating every input synapse of a neuron
    on each of its spikes.
    """
    e = num_excitatory
    synaptic = ops.synaptic_accumulates + ops.spikes + ops.spikes * (e - 1)
    learning = ops.spikes * num_inputs if training else 0
    return OpCounts(
        synaptic_accumulates=synaptic,
        neuron_updates=ops.neuron_updates + e * num_steps_total,
        learning_updates=learning,
        inhibition_events=0,
        spikes=2 * ops.spikes,
    )


class EnergyMode(str, enum.Enum):
    OP_COUNT = "opcount"
    TIME_POWER = "timepower"


# Joules per 32-bit operation: SRAM word access ~5 pJ, fp add ~0.9 pJ,
# fp mult ~3.7 pJ (45 nm figures).
DEFAULT_COEFFICIENTS = {
    "synaptic_accumulates": 5.9e-12,  # weight read + add
    "neuron_updates": 29.2e-12,  # v_mem/theta read+write, leak mult-add, compare, theta decay
    "learning_updates": 27.9e-12,  # read w and x_pre, write w, 3 mult + 2 add
    "inhibition_events": 11.8e-12,  # v_mem read+write, subtract, floor compare
}


@dataclass
class EnergyModel:
    mode: EnergyMode = EnergyMode.OP_COUNT
    coefficients: dict = field(default_factory=lambda: dict(DEFAULT_COEFFICIENTS))
    power_watts: float = 0.0

    def __post_init__(self):
        self.mode = EnergyMode(self.mode)
        if any(c < 0 for c in self.coefficients.values()) or self.power_watts < 0:
            raise ValueError("energy coefficients and power must be non-negative")


def operand_bits(formats=None) -> dict:
    """Operand width per op type for a set of group formats."""
    formats = formats or {}
    wbits = format_width(formats.get("weights"))
    vbits = format_width(formats.get("v_mem"))
    return {
        "synaptic_accumulates": wbits,
        "neuron_updates": vbits,
        "learning_updates": wbits,
        "inhibition_events": vbits,
    }


def energy_estimate(ops=None, model: EnergyModel = None, bits=None, elapsed=None) -> float:
    """Energy in Joules.

    OpCount mode: ``sum(count * coeff * bits / 32)``. TimePower mode:
    ``elapsed * power``.
    """
    model = model or EnergyModel()
    if model.mode is EnergyMode.TIME_POWER:
        if elapsed is None or ops is not None:
            raise ValueError("time-power energy needs elapsed seconds and no op counts")
        if elapsed < 0:
            raise ValueError("elapsed time must be non-negative")
        return float(elapsed) * model.power_watts
    if ops is None or elapsed is not None:
        raise ValueError("op-count energy needs OpCounts and no elapsed time")
    bits = bits or {}
    total = 0.0
    for name, coeff in model.coefficients.items():
        total += getattr(ops, name) * coeff * (bits.get(name, 32) / 32)
    return total
