"""Experiment configuration: a flat TOML file of key = value pairs."""
from __future__ import annotations

import os
from dataclasses import MISSING, dataclass, field, fields

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .fixedpoint import FixedPointFormat, RoundingMode
from .learning import LearnConfig
from .metrics import DEFAULT_COEFFICIENTS, EnergyMode, EnergyModel
from .network import LayerParams
from .quantization import QuantScheme


class ConfigError(ValueError):
    pass


def _opt(default, help, **kw):
    return field(default=default, metadata={"help": help, **kw})


def _opt_list(default, help):
    return field(default_factory=lambda: list(default), metadata={"help": help, "default_repr": repr(default)})


_layer = LayerParams()


@dataclass
class ExperimentConfig:
    train_images: str = field(metadata={"help": "training IDX image file", "path": True})
    train_labels: str = field(metadata={"help": "training IDX label file", "path": True})
    test_images: str = field(metadata={"help": "test IDX image file", "path": True})
    test_labels: str = field(metadata={"help": "test IDX label file", "path": True})
    dataset: str = _opt("mnist", "dataset name written to reports")

    num_inputs: int = _opt(784, "input count; must match the image size")
    num_excitatory: int = _opt(100, "excitatory neurons")
    num_train: int = _opt(5000, "training samples (one epoch)")
    num_label: int = _opt(5000, "training-set samples used to assign neuron labels")
    num_test: int = _opt(1000, "test samples")
    num_calibration: int = _opt(500, "labelling samples used for range observation")
    seed: int = _opt(0, "root seed for all randomness")

    num_steps: int = _opt(250, "presentation window in timesteps")
    rate_scale: float = _opt(0.06375, "spike probability per step at intensity 1")

    v_rest: float = _opt(_layer.v_rest, "resting potential")
    v_reset: float = _opt(_layer.v_reset, "reset potential")
    v_thresh_base: float = _opt(_layer.v_thresh_base, "base firing threshold")
    tau_mem: float = _opt(_layer.tau_mem, "membrane time constant (steps)")
    theta_inc: float = _opt(_layer.theta_inc, "threshold increment per spike")
    tau_theta: float = _opt(_layer.tau_theta, "threshold decay constant (steps)")
    t_refrac: int = _opt(_layer.t_refrac, "refractory period (steps)")
    w_inh: float = _opt(_layer.w_inh, "direct lateral inhibition per firing neuron")
    w_max: float = _opt(1.0, "maximum weight")
    init_high: float = _opt(0.3, "initial weights ~ U(0, init_high)")

    rule: str = _opt("enhanced", "learning rule: enhanced | pairwise")
    eta_post: float = _opt(0.005, "learning rate")
    n_th: int = _opt(5, "postsynaptic spike count per potentiation step of k")
    update_period: int = _opt(10, "steps between weight updates (0 = once per window)")
    tau_pre: float = _opt(20.0, "presynaptic trace time constant (steps)")
    x_tar: float = _opt(0.4, "target trace of the pair-wise rule")
    norm_target: float = _opt(50.0, "per-neuron incoming weight sum after each sample (0 = off)")

    scheme: str = _opt("ptq", "scheme for the ptq/itq subcommands")
    rounding: str = _opt("truncate", "rounding for the ptq/itq subcommands")
    groups: str = _opt("qW", "group set for the ptq/itq subcommands: qW | qWN")
    precision: int = _opt(8, "total bits per group when no explicit formats are given")
    wfmt: str = _opt("", "explicit weight format, e.g. qu1.7 (overrides precision)")
    vmemfmt: str = _opt("", "explicit v_mem format (qWN only)")
    vthfmt: str = _opt("", "explicit v_thresh format (qWN only)")

    schemes: list = _opt_list(["ptq", "itq"], "sweep: quantization schemes")
    roundings: list = _opt_list(["truncate", "nearest", "stochastic"], "sweep: rounding modes")
    precisions: list = _opt_list([4, 6, 8, 16], "sweep: total bits per quantized group")
    group_sets: list = _opt_list(["qW", "qWN"], "sweep: quantized group sets")
    mu: list = _opt_list([0.01], "trade-off coefficients; the first one scores sweep reports")
    mem_budget: float = _opt(0.0, "memory budget in bits for selection (0 = none)")
    energy_budget: float = _opt(0.0, "inference energy budget in J for selection (0 = none)")

    e_synaptic: float = _opt(DEFAULT_COEFFICIENTS["synaptic_accumulates"], "J per 32-bit synaptic accumulate")
    e_neuron: float = _opt(DEFAULT_COEFFICIENTS["neuron_updates"], "J per 32-bit neuron update")
    e_learning: float = _opt(DEFAULT_COEFFICIENTS["learning_updates"], "J per 32-bit weight update")
    e_inhibition: float = _opt(DEFAULT_COEFFICIENTS["inhibition_events"], "J per 32-bit inhibition event")

    batch_size: int = _opt(250, "samples simulated side by side during inference")

    def __post_init__(self):
        try:
            self.layer_params()
            self.learn_config()
            for name in ("wfmt", "vmemfmt", "vthfmt"):
                if getattr(self, name):
                    FixedPointFormat.parse(getattr(self, name))
            QuantScheme.parse(self.scheme)
            RoundingMode.parse(self.rounding)
            for s in self.schemes:
                QuantScheme.parse(s)
            for r in self.roundings:
                RoundingMode.parse(r)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for g in [self.groups, *self.group_sets]:
            if g not in ("qW", "qWN"):
                raise ConfigError(f"unknown group set {g!r}; expected qW or qWN")
        if self.rule not in ("enhanced", "pairwise"):
            raise ConfigError(f"unknown learning rule {self.rule!r}")
        if any(m < 0 for m in self.mu) or not self.mu:
            raise ConfigError("mu must be a non-empty list of non-negative numbers")
        for name in ("num_excitatory", "num_train", "num_label", "num_test", "num_calibration", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")

    # -- derived objects --------------------------------------------------------

    def layer_params(self) -> LayerParams:
        return LayerParams(self.v_rest, self.v_reset, self.v_thresh_base, self.tau_mem, self.theta_inc,
                           self.tau_theta, self.t_refrac, self.w_inh)

    def learn_config(self) -> LearnConfig:
        return LearnConfig(
            eta_post=self.eta_post, w_max=self.w_max, n_th=self.n_th,
            update_period=self.update_period or None, tau_pre=self.tau_pre, x_tar=self.x_tar,
            norm_target=self.norm_target or None,
        )

    def energy_model(self) -> EnergyModel:
        # reports must be reproducible, so experiments always use op counts
        coeffs = {
            "synaptic_accumulates": self.e_synaptic,
            "neuron_updates": self.e_neuron,
            "learning_updates": self.e_learning,
            "inhibition_events": self.e_inhibition,
        }
        return EnergyModel(EnergyMode.OP_COUNT, coeffs)

    def explicit_formats(self):
        """Formats given directly in the config, or None if no weight format is set."""
        if not self.wfmt:
            return None
        formats = {"weights": FixedPointFormat.parse(self.wfmt)}
        if self.groups == "qWN":
            if not (self.vmemfmt and self.vthfmt):
                raise ConfigError("qWN with explicit formats needs wfmt, vmemfmt and vthfmt")
            formats["v_mem"] = FixedPointFormat.parse(self.vmemfmt)
            formats["v_thresh"] = FixedPointFormat.parse(self.vthfmt)
        return formats

    def seed_for(self, purpose) -> tuple:
        """Entropy tuple for one independent random stream."""
        streams = {"init": 0, "train": 1, "label": 2, "test": 3, "quant": 4}
        return (int(self.seed), streams[purpose])


def config_keys():
    return [f for f in fields(ExperimentConfig)]


def describe_keys() -> str:
    lines = []
    for f in config_keys():
        if f.default is MISSING and f.default_factory is MISSING:
            default = "(required)"
        elif f.default_factory is not MISSING:
            default = f.metadata.get("default_repr", "")
        else:
            default = repr(f.default)
        lines.append(f"  {f.name:<16} {default:<28} {f.metadata.get('help', '')}")
    return "\n".join(lines)


def parse_config(path) -> ExperimentConfig:
    """Strictly parse a flat config file; unknown keys are rejected."""
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    known = {f.name: f for f in config_keys()}
    for key, value in raw.items():
        if isinstance(value, dict):
            raise ConfigError(f"{path}: key {key!r} must be a plain value, tables are not allowed")
        if key not in known:
            raise ConfigError(f"{path}: unknown config key {key!r}")
    missing = [n for n, f in known.items()
               if f.default is MISSING and f.default_factory is MISSING and n not in raw]
    if missing:
        raise ConfigError(f"{path}: missing required key {missing[0]!r}")
    base = os.path.dirname(os.path.abspath(path))
    values = {}
    for key, value in raw.items():
        f = known[key]
        if f.metadata.get("path"):
            value = os.path.join(base, os.path.expanduser(str(value)))
        elif f.type in ("int", int) and isinstance(value, float):
            raise ConfigError(f"{path}: key {key!r} must be an integer")
        elif f.type in ("float", float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        values[key] = value
    return ExperimentConfig(**values)
