import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tinysnn.fixedpoint import FixedPointFormat
from tinysnn.metrics import (
    DEFAULT_COEFFICIENTS, EnergyModel, OpCounts, ParameterInventory, baseline_inventory, baseline_op_counts,
    energy_estimate, memory_footprint, model_inventory, normalized_memory, operand_bits,
)

Q8 = FixedPointFormat(False, 1, 7)


def test_footprint_paper_topology():
    inv = model_inventory(784, 400, include_constants=False)
    assert inv.num_weights == 313_600
    assert memory_footprint(inv) == 10_060_800


def test_footprint_qw_8bit():
    inv = model_inventory(784, 400, {"weights": Q8}, include_constants=False)
    assert memory_footprint(inv) == 2_508_800 + 25_600 == 2_534_400


def test_footprint_with_constants():
    assert memory_footprint(model_inventory(784, 400)) == 10_060_800 + 8 * 32
    fmts = {"weights": Q8, "v_mem": FixedPointFormat(True, 6, 1), "v_thresh": FixedPointFormat(False, 6, 2)}
    # weights 8 bit, v_mem/theta 8 bit, five grouped constants at 8 bit, three time constants at 32 bit
    assert memory_footprint(model_inventory(784, 400, fmts)) == 313_600 * 8 + 800 * 8 + 5 * 8 + 3 * 32


def test_empty_inventory():
    assert memory_footprint(ParameterInventory(0, 0, [])) == 0


def test_normalized_memory():
    assert normalized_memory(7, 7) == 1.0
    assert round(normalized_memory(2_534_400, 10_060_800), 4) == 0.2519
    assert normalized_memory(0, 5) == 0.0
    with pytest.raises(ValueError):
        normalized_memory(1, 0)


def test_baseline_inventory():
    assert baseline_inventory(784, 400).num_weights == 473_600
    assert baseline_inventory(10, 1).num_weights == 11
    tiny = model_inventory(784, 400)
    base = baseline_inventory(784, 400)
    assert tiny.num_weights < base.num_weights
    assert memory_footprint(base) > memory_footprint(tiny)


@given(st.integers(1, 1000), st.integers(1, 64), st.integers(0, 1000), st.integers(1, 64))
def test_footprint_additive(n1, b1, n2, b2):
    a = ParameterInventory(n1, b1, [("x", 3, 7)])
    b = ParameterInventory(n2, b1, [("y", 2, b2)])
    assert memory_footprint(a + b) == memory_footprint(a) + memory_footprint(b)


def test_describe_lists_every_entry():
    text = model_inventory(4, 2).describe()
    assert "weights: 8 x 32 bit" in text and "theta: 2 x 32 bit" in text and "w_inh" in text


def test_energy_examples():
    model = EnergyModel(coefficients={"synaptic_accumulates": 1e-9})
    assert energy_estimate(OpCounts(), model) == 0.0
    e32 = energy_estimate(OpCounts(synaptic_accumulates=10**6), model)
    assert e32 == pytest.approx(1e-3, rel=1e-12)
    e8 = energy_estimate(OpCounts(synaptic_accumulates=10**6), model, {"synaptic_accumulates": 8})
    assert e32 == 4 * e8
    assert energy_estimate(elapsed=0.0, model=EnergyModel("timepower", power_watts=3.0)) == 0.0
    assert energy_estimate(elapsed=2.0, model=EnergyModel("timepower", power_watts=3.0)) == 6.0


def test_energy_mode_mismatch():
    with pytest.raises(ValueError):
        energy_estimate(OpCounts(), EnergyModel("timepower"))
    with pytest.raises(ValueError):
        energy_estimate(elapsed=1.0, model=EnergyModel())
    with pytest.raises(ValueError):
        EnergyModel(coefficients={"neuron_updates": -1.0})


def _ops(rng):
    return OpCounts(*(int(v) for v in rng.integers(0, 10**6, 5)))


def test_energy_additive_and_homogeneous():
    rng = np.random.default_rng(0)
    a, b = _ops(rng), _ops(rng)
    m = EnergyModel()
    assert energy_estimate(a + b, m) == pytest.approx(energy_estimate(a, m) + energy_estimate(b, m), rel=1e-12)
    doubled = EnergyModel(coefficients={k: 2 * v for k, v in DEFAULT_COEFFICIENTS.items()})
    assert energy_estimate(a, doubled) == pytest.approx(2 * energy_estimate(a, m), rel=1e-12)


def test_operand_bits():
    assert operand_bits() == dict.fromkeys(DEFAULT_COEFFICIENTS, 32)
    bits = operand_bits({"weights": Q8, "v_mem": FixedPointFormat(True, 3, 4)})
    assert bits["synaptic_accumulates"] == bits["learning_updates"] == 8
    assert bits["neuron_updates"] == bits["inhibition_events"] == 8


def test_baseline_op_counts():
    ops = OpCounts(synaptic_accumulates=1000, neuron_updates=500, learning_updates=300, inhibition_events=40,
                   spikes=10)
    base = baseline_op_counts(ops, num_inputs=20, num_excitatory=5, num_steps_total=100, training=True)
    assert base.synaptic_accumulates == 1000 + 10 + 10 * 4
    assert base.neuron_updates == 500 + 5 * 100
    assert base.learning_updates == 10 * 20
    assert base.inhibition_events == 0
    assert baseline_op_counts(ops, 20, 5, 100, training=False).learning_updates == 0


def test_op_counts_non_negative():
    with pytest.raises(ValueError):
        OpCounts(spikes=-1)
    total = OpCounts(1, 2, 3, 4, 5)
    total += OpCounts(1, 1, 1, 1, 1)
    assert total.as_dict() == {"synaptic_accumulates": 2, "neuron_updates": 3, "learning_updates": 4,
                               "inhibition_events": 5, "spikes": 6}
