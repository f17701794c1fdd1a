"""End-to-end experiment flow: train, quantize, evaluate, score.

Every random stream is derived from the config seed, so a repeated run with
the same config reproduces models and reports bit for bit, whatever the
number of worker processes.
"""
from __future__ import annotations

import concurrent.futures
import logging
import zlib
from dataclasses import dataclass

import numpy as np

from .dataio import load_idx
from .encoding import EncodedSamples, normalize_pixels
from .evaluation import assign_neuron_labels, evaluate_accuracy
from .fixedpoint import FixedPointFormat, RoundingMode
from .learning import train_network
from .metrics import OpCounts, energy_estimate, memory_footprint, model_inventory, operand_bits
from .network import NetworkModel
from .quantization import (
    GROUP_SETS, QuantConfig, QuantScheme, RangeReport, apply_ptq, observe_ranges, train_itq,
)
from .selection import CandidateReport, NoFeasibleModelError, select_model

log = logging.getLogger(__name__)


@dataclass
class Workspace:
    """Encoded sample streams for one config."""

    train: EncodedSamples
    label: EncodedSamples
    test: EncodedSamples


def _encoded(images, labels, cfg, purpose):
    return EncodedSamples(normalize_pixels(images), labels, cfg.num_steps, cfg.rate_scale, cfg.seed_for(purpose))


def load_workspace(cfg) -> Workspace:
    train = load_idx(cfg.train_images, cfg.train_labels, cfg.dataset)
    test = load_idx(cfg.test_images, cfg.test_labels, cfg.dataset)
    n_in = int(np.prod(train.images.shape[1:]))
    if n_in != cfg.num_inputs:
        raise ValueError(f"images have {n_in} pixels but num_inputs is {cfg.num_inputs}")
    for name, have, want in (("training", len(train), max(cfg.num_train, cfg.num_label)),
                             ("test", len(test), cfg.num_test)):
        if have < want:
            raise ValueError(f"{name} set holds {have} samples, config asks for {want}")
    return Workspace(
        train=_encoded(train.images[:cfg.num_train], train.labels[:cfg.num_train], cfg, "train"),
        label=_encoded(train.images[:cfg.num_label], train.labels[:cfg.num_label], cfg, "label"),
        test=_encoded(test.images[:cfg.num_test], test.labels[:cfg.num_test], cfg, "test"),
    )


def calibration_samples(cfg, ws):
    return ws.label[:min(cfg.num_calibration, len(ws.label))]


def initial_model(cfg) -> NetworkModel:
    rng = np.random.default_rng(cfg.seed_for("init"))
    return NetworkModel.initialize(cfg.num_inputs, cfg.num_excitatory, cfg.layer_params(), cfg.w_max, rng,
                                   init_high=cfg.init_high)


def _lineage(cfg, ops: OpCounts):
    return {"seed": cfg.seed, "num_train": cfg.num_train, "num_steps": cfg.num_steps, "rule": cfg.rule,
            "train_ops": ops.as_dict()}


def train_reference(cfg, ws) -> NetworkModel:
    """Train the fp32 model; training op counts go into its lineage."""
    model = initial_model(cfg)
    ops = OpCounts()
    train_network(model, ws.train, cfg.learn_config(), rule=cfg.rule, op_counter=ops, progress_every=500)
    model.lineage = _lineage(cfg, ops)
    return model


def train_quantized(cfg, ws, qcfg: QuantConfig, rng=None) -> NetworkModel:
    model = initial_model(cfg)
    ops = OpCounts()
    model = train_itq(model, ws.train, cfg.learn_config(), qcfg, rng, op_counter=ops, rule=cfg.rule)
    model.lineage = dict(model.lineage, **_lineage(cfg, ops))
    return model


def training_ops(model: NetworkModel) -> OpCounts:
    ops = model.lineage.get("train_ops")
    if ops is None:
        raise ValueError("model lineage carries no training op counts")
    return OpCounts(**ops)


def quant_rng(cfg, qcfg: QuantConfig):
    """Generator for stochastic rounding, keyed by the candidate's config tuple."""
    tag = zlib.crc32("|".join(qcfg.key()).encode("ascii"))
    return np.random.default_rng((*cfg.seed_for("quant"), tag))


def single_config(cfg, ranges: RangeReport = None) -> QuantConfig:
    """The config's own scheme/rounding/groups with explicit or range-derived formats."""
    formats = cfg.explicit_formats()
    if formats is None:
        if ranges is None:
            raise ValueError("no explicit formats in the config and no reference ranges to derive them")
        return ranges.config_for(cfg.scheme, cfg.rounding, cfg.precision, cfg.groups)
    return QuantConfig(cfg.scheme, cfg.rounding, formats, cfg.groups)


def candidate_grid(cfg, ranges: RangeReport):
    """Sweep grid in a fixed order: scheme, rounding, precision, group set."""
    grid = []
    for scheme in cfg.schemes:
        for rounding in cfg.roundings:
            for bits in cfg.precisions:
                for groups in cfg.group_sets:
                    grid.append(ranges.config_for(scheme, rounding, int(bits), groups))
    return grid


@dataclass
class Reference:
    model: NetworkModel
    label_map: object
    accuracy: float
    infer_ops: OpCounts
    ranges: RangeReport

    @property
    def train_ops(self) -> OpCounts:
        return training_ops(self.model)


def prepare_reference(cfg, ws, model: NetworkModel) -> Reference:
    label_map = assign_neuron_labels(model, ws.label, batch_size=cfg.batch_size)
    ops = OpCounts()
    acc = evaluate_accuracy(model, label_map, ws.test, cfg.batch_size, ops)
    ranges = observe_ranges(model, calibration_samples(cfg, ws), cfg.batch_size)
    log.info("reference accuracy %.4f", acc)
    return Reference(model, label_map, acc, ops, ranges)


def memory_bits(cfg, formats=None) -> int:
    return memory_footprint(model_inventory(cfg.num_inputs, cfg.num_excitatory, formats or {}))


def evaluate_candidate(cfg, ws, ref: Reference, qcfg: QuantConfig) -> CandidateReport:
    """Build, evaluate and cost one quantized candidate.

    PTQ candidates reuse the reference label map (the neurons' roles do not
    change when only precision drops); ITQ candidates are trained from
    scratch and relabelled.
    """
    rng = quant_rng(cfg, qcfg) if qcfg.rounding is RoundingMode.STOCHASTIC else None
    energy = cfg.energy_model()
    bits = operand_bits(qcfg.formats)
    if qcfg.scheme is QuantScheme.PTQ:
        model = apply_ptq(ref.model, qcfg, rng)
        label_map = ref.label_map
        e_train = energy_estimate(ref.train_ops, energy, operand_bits())
    else:
        model = train_quantized(cfg, ws, qcfg, rng)
        label_map = assign_neuron_labels(model, ws.label, batch_size=cfg.batch_size)
        e_train = energy_estimate(training_ops(model), energy, bits)
    ops = OpCounts()
    acc = evaluate_accuracy(model, label_map, ws.test, cfg.batch_size, ops)
    log.info("%s: accuracy %.4f", " ".join(qcfg.key()), acc)
    return CandidateReport(qcfg, acc, memory_bits(cfg, qcfg.formats), memory_bits(cfg), e_train,
                           energy_estimate(ops, energy, bits), cfg.mu[0], cfg.dataset)


# -- report rows ----------------------------------------------------------------

def row_key(row) -> tuple:
    return (row["scheme"], row["rounding"], row["wfmt"], row["vmemfmt"], row["vthfmt"])


def config_from_row(row) -> QuantConfig:
    formats = {"weights": row["wfmt"], "v_mem": row["vmemfmt"], "v_thresh": row["vthfmt"]}
    formats = {g: FixedPointFormat.parse(f) for g, f in formats.items()}
    quantized = tuple(g for g, f in formats.items() if f is not None)
    groups = next((name for name, members in GROUP_SETS.items() if members == quantized), None)
    if groups is None:
        raise ValueError(f"row quantizes groups {quantized}, which is not a known group set")
    return QuantConfig(row["scheme"], row["rounding"], formats, groups)


def candidate_from_row(row, mu=None) -> CandidateReport:
    m_q = int(row["mem_bits"])
    m_0 = int(round(m_q / float(row["mem_norm"])))
    return CandidateReport(config_from_row(row), float(row["acc"]), m_q, m_0, float(row["e_train_J"]),
                           float(row["e_infer_J"]), float(row["mu"]) if mu is None else mu, row["dataset"],
                           row["selected"] == "1")


def mark_selected(candidates, mu, mem_budget=None, energy_budget=None):
    """Rescore every candidate with ``mu`` and flag the selected one.

    Raises ``NoFeasibleModelError`` when the budgets exclude everything.
    """
    rescored = [c.with_mu(mu) for c in candidates]
    for c in rescored:
        c.selected = False
    best = select_model(rescored, mu, mem_budget, energy_budget)
    # select_model hands back a copy, so match on the config tuple
    for c in rescored:
        if c.config.key() == best.config.key():
            c.selected = True
            break
    return rescored


# -- sweep ----------------------------------------------------------------------

_worker = {}


def _init_worker(cfg, ws, ref):
    _worker.update(cfg=cfg, ws=ws, ref=ref)


def _run_candidate(qcfg):
    return evaluate_candidate(_worker["cfg"], _worker["ws"], _worker["ref"], qcfg)


def run_sweep(cfg, ws, ref: Reference, existing_rows=(), jobs=1):
    """Evaluate the grid, skipping configs already in ``existing_rows``.

    Returns candidates in grid order, followed by any earlier rows outside
    the grid in their original order. The first ``mu`` of the config scores
    every row; budgets from the config decide the selected row.
    """
    done = {}
    for row in existing_rows:
        done.setdefault(row_key(row), candidate_from_row(row, cfg.mu[0]))
    grid = candidate_grid(cfg, ref.ranges)
    todo = [q for q in grid if q.key() not in done]
    log.info("sweep: %d candidates, %d already in the report", len(grid), len(grid) - len(todo))
    if jobs > 1 and len(todo) > 1:
        with concurrent.futures.ProcessPoolExecutor(jobs, initializer=_init_worker,
                                                    initargs=(cfg, ws, ref)) as pool:
            results = list(pool.map(_run_candidate, todo))
    else:
        results = [evaluate_candidate(cfg, ws, ref, q) for q in todo]
    for q, cand in zip(todo, results):
        done[q.key()] = cand
    grid_keys = [q.key() for q in grid]
    ordered = [done[k] for k in dict.fromkeys(grid_keys)]
    ordered += [c for k, c in done.items() if k not in set(grid_keys)]
    try:
        ordered = mark_selected(ordered, cfg.mu[0], cfg.mem_budget or None, cfg.energy_budget or None)
    except NoFeasibleModelError as exc:
        log.warning("%s; no row marked as selected", exc)
        ordered = [c.with_mu(cfg.mu[0]) for c in ordered]
        for c in ordered:
            c.selected = False
    return ordered


def quantize_single(cfg, ws, ref: Reference) -> NetworkModel:
    qcfg = single_config(cfg, ref.ranges)
    if qcfg.scheme is not QuantScheme.PTQ:
        raise ValueError("the ptq command needs scheme = \"ptq\"")
    rng = quant_rng(cfg, qcfg) if qcfg.rounding is RoundingMode.STOCHASTIC else None
    return apply_ptq(ref.model, qcfg, rng)
