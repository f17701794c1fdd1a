"""Neuron-to-class assignment and spike-count classification."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import run_inference_batch

NUM_CLASSES = 10


@dataclass
class NeuronLabelMap:
    labels: np.ndarray  # [E] assigned class per neuron
    responses: np.ndarray  # [E, C] mean spike count per class
    silent: np.ndarray  # [E] True where the neuron never responded

    @property
    def num_classes(self) -> int:
        return self.responses.shape[1]


def collect_counts(model, samples, batch_size=250, op_counter=None):
    """Run inference over ``(SpikeTrain, label)`` pairs; returns ``(counts, labels)``."""
    counts, labels, batch, batch_labels = [], [], [], []

    def flush():
        if batch:
            counts.append(run_inference_batch(model, np.stack(batch), op_counter))
            labels.extend(batch_labels)
            batch.clear()
            batch_labels.clear()

    for train, label in samples:
        batch.append(train.spikes)
        batch_labels.append(label)
        if len(batch) == batch_size:
            flush()
    flush()
    if not counts:
        return np.zeros((0, model.num_excitatory), dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(counts), np.asarray(labels, dtype=np.int64)


def labels_from_counts(counts, labels, num_classes=NUM_CLASSES) -> NeuronLabelMap:
    counts = np.asarray(counts, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    present = np.bincount(labels, minlength=num_classes)
    missing = np.flatnonzero(present[:num_classes] == 0)
    if missing.size:
        raise ValueError(f"class {int(missing[0])} has no labelling samples")
    sums = np.zeros((num_classes, counts.shape[1]))
    np.add.at(sums, labels, counts)
    responses = (sums / present[:, None]).T
    # argmax returns the first maximum, i.e. the lower class index on ties
    assigned = responses.argmax(axis=1)
    silent = responses.max(axis=1) == 0
    return NeuronLabelMap(assigned, responses, silent)


def assign_neuron_labels(model, labeled_samples, num_classes=NUM_CLASSES, batch_size=250) -> NeuronLabelMap:
    """Label each neuron with the class that drives it hardest on average.

    Runs with learning off and theta frozen; the model is not modified.
    """
    counts, labels = collect_counts(model, labeled_samples, batch_size)
    return labels_from_counts(counts, labels, num_classes)


def predict_from_counts(label_map: NeuronLabelMap, counts):
    """Vectorized classifier: mean count per label group, argmax, ties low."""
    counts = np.atleast_2d(np.asarray(counts, dtype=np.float64))
    if counts.shape[1] != len(label_map.labels):
        raise ValueError(f"expected {len(label_map.labels)} neuron counts, got {counts.shape[1]}")
    c = label_map.num_classes
    members = np.bincount(label_map.labels, minlength=c).astype(np.float64)
    group = np.zeros((counts.shape[0], c))
    for cls in range(c):
        if members[cls]:
            group[:, cls] = counts[:, label_map.labels == cls].mean(axis=1)
    return group.argmax(axis=1)


def classify_sample(model, label_map: NeuronLabelMap, spike_counts):
    """Predicted class for one sample's per-neuron counts.

    Returns ``(prediction, flagged)``; ``flagged`` marks an all-zero response,
    which falls back to the lowest class index.
    """
    spike_counts = np.asarray(spike_counts)
    if model is not None and spike_counts.shape != (model.num_excitatory,):
        raise ValueError(f"expected {model.num_excitatory} counts, got shape {spike_counts.shape}")
    pred = int(predict_from_counts(label_map, spike_counts)[0])
    return pred, bool(not spike_counts.any())


def evaluate_accuracy(model, label_map: NeuronLabelMap, test_set, batch_size=250, op_counter=None) -> float:
    counts, labels = collect_counts(model, test_set, batch_size, op_counter)
    if len(labels) == 0:
        raise ValueError("test set is empty")
    return float((predict_from_counts(label_map, counts) == labels).mean())
