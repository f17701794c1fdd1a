"""STDP spiking network with direct lateral inhibition and fixed-point exploration."""
from .encoding import EncodedSamples, SpikeTrain, poisson_encode
from .estimator import PoissonEncoder, TinySNNClassifier
from .evaluation import NeuronLabelMap, assign_neuron_labels, classify_sample, evaluate_accuracy
from .fixedpoint import FixedPointFormat, RoundingMode, quantize_tensor, quantize_value
from .learning import LearnConfig, compute_k, enhanced_stdp_update, train_network
from .metrics import EnergyModel, OpCounts, ParameterInventory, energy_estimate, memory_footprint
from .network import LayerParams, NetworkModel, step_layer
from .quantization import QuantConfig, QuantScheme, apply_ptq, observe_ranges, train_itq
from .selection import CandidateReport, NoFeasibleModelError, reward, select_model

__version__ = "0.1.0"

__all__ = [
    "CandidateReport", "EncodedSamples", "EnergyModel", "FixedPointFormat", "LayerParams", "LearnConfig",
    "NetworkModel", "NeuronLabelMap", "NoFeasibleModelError", "OpCounts", "ParameterInventory",
    "PoissonEncoder", "QuantConfig", "QuantScheme", "RoundingMode", "SpikeTrain", "TinySNNClassifier",
    "apply_ptq", "assign_neuron_labels", "classify_sample", "compute_k", "energy_estimate",
    "enhanced_stdp_update", "evaluate_accuracy", "memory_footprint", "observe_ranges", "poisson_encode",
    "quantize_tensor", "quantize_value", "reward", "select_model", "step_layer", "train_itq", "train_network",
]
