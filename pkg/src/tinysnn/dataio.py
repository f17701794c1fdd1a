"""IDX dataset loading, model files and the CSV report."""
from __future__ import annotations

import csv
import gzip
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .fixedpoint import FixedPointFormat, format_name, from_raw, to_raw
from .network import GROUPS, LayerParams, NetworkModel

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
NUM_CLASSES = 10
MODEL_VERSION = 1
MODEL_TAG = "tinysnn-model"


class IdxError(ValueError):
    """Malformed IDX input."""


class BadMagicError(IdxError):
    pass


class TruncatedFileError(IdxError):
    pass


class CountMismatchError(IdxError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass
class Dataset:
    images: np.ndarray  # [N, rows, cols] uint8
    labels: np.ndarray  # [N] uint8
    name: str = ""

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise CountMismatchError(f"{len(self.images)} images but {len(self.labels)} labels")
        if self.labels.size and int(self.labels.max()) >= NUM_CLASSES:
            raise IdxError(f"label {int(self.labels.max())} outside 0..{NUM_CLASSES - 1}")

    def __len__(self):
        return len(self.labels)

    def subset(self, start, stop):
        return Dataset(self.images[start:stop], self.labels[start:stop], self.name)


def _read_bytes(path):
    with open(path, "rb") as fh:
        data = fh.read()
    # gzip magic 1f 8b
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def _parse_idx(data, expected_magic, ndim, path):
    if len(data) < 4:
        raise TruncatedFileError(f"{path}: truncated at byte offset {len(data)} while reading magic")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected_magic:
        raise BadMagicError(f"{path}: bad magic 0x{magic:08x} at byte offset 0, expected 0x{expected_magic:08x}")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise TruncatedFileError(f"{path}: truncated at byte offset {len(data)} inside the {header}-byte header")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    need = header + int(np.prod(dims, dtype=np.int64))
    if len(data) < need:
        raise TruncatedFileError(f"{path}: truncated at byte offset {len(data)}, payload needs {need} bytes")
    payload = np.frombuffer(data, dtype=np.uint8, count=need - header, offset=header)
    return payload.reshape(dims).copy()


def load_idx(images_path, labels_path, name=None) -> Dataset:
    """Parse a big-endian IDX image/label pair (optionally gzipped)."""
    images = _parse_idx(_read_bytes(images_path), IMAGE_MAGIC, 3, images_path)
    labels = _parse_idx(_read_bytes(labels_path), LABEL_MAGIC, 1, labels_path)
    if len(images) != len(labels):
        raise CountMismatchError(
            f"count mismatch: {images_path} holds {len(images)} images (header offset 4), "
            f"{labels_path} holds {len(labels)} labels (header offset 4)"
        )
    return Dataset(images, labels, name or os.path.basename(str(images_path)))


def write_idx(images, labels, images_path, labels_path):
    """Write an uncompressed IDX pair; used for fixtures and subsets."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGE_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", LABEL_MAGIC, len(labels)))
        fh.write(labels.tobytes())


# -- model files --------------------------------------------------------------

def _encode_array(values, fmt):
    values = np.asarray(values)
    if fmt is None:
        return " ".join(repr(float(v)) for v in values.ravel())
    return " ".join(str(int(c)) for c in to_raw(values, fmt).ravel())


def _decode_array(line, fmt, shape):
    tokens = line.split()
    if len(tokens) != int(np.prod(shape)):
        raise ModelFormatError(f"expected {int(np.prod(shape))} values, found {len(tokens)}")
    if fmt is None:
        return np.array([float(t) for t in tokens], dtype=np.float64).reshape(shape)
    return from_raw(np.array([int(t) for t in tokens], dtype=np.int64), fmt).reshape(shape)


def save_model(model: NetworkModel, path):
    """Write a versioned text model file.

    Layout: a ``tinysnn-model <version>`` line, one JSON header line, then
    one line each for weights (row-major), v_mem, theta and refractory
    counters. Quantized groups are written as integer grid codes, fp32
    groups as round-trip decimal text.
    """
    header = {
        "num_inputs": model.num_inputs,
        "num_excitatory": model.num_excitatory,
        "w_max": repr(float(model.w_max)),
        "formats": {g: format_name(model.formats[g]) for g in GROUPS},
        "layer_params": {k: repr(float(v)) if isinstance(v, float) else v for k, v in vars(model.params).items()},
        "lineage": model.lineage,
    }
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{MODEL_TAG} {MODEL_VERSION}\n")
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        fh.write(_encode_array(model.weights, model.formats["weights"]) + "\n")
        fh.write(_encode_array(model.v_mem, model.formats["v_mem"]) + "\n")
        # the v_thresh group is the effective threshold base + theta
        vth = model.formats["v_thresh"]
        fh.write(_encode_array(model.theta if vth is None else model.v_thresh, vth) + "\n")
        fh.write(" ".join(str(int(r)) for r in model.refrac) + "\n")


def load_model(path) -> NetworkModel:
    with open(path, encoding="ascii") as fh:
        lines = fh.read().split("\n")
    first = lines[0].split()
    if len(first) != 2 or first[0] != MODEL_TAG:
        raise ModelFormatError(f"{path}: not a tinysnn model file")
    try:
        version = int(first[1])
    except ValueError:
        raise ModelFormatError(f"{path}: unreadable version {first[1]!r}") from None
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported model file version {version}, expected {MODEL_VERSION}")
    if len(lines) < 6:
        raise ModelFormatError(f"{path}: truncated model file")
    header = json.loads(lines[1])
    n_in, e = header["num_inputs"], header["num_excitatory"]
    formats = {g: FixedPointFormat.parse(header["formats"][g]) for g in GROUPS}
    raw = header["layer_params"]
    params = LayerParams(**{k: float(v) if isinstance(v, str) else v for k, v in raw.items()})
    theta = _decode_array(lines[4], formats["v_thresh"], (e,))
    if formats["v_thresh"] is not None:
        theta = theta - params.v_thresh_base
    model = NetworkModel(
        weights=_decode_array(lines[2], formats["weights"], (n_in, e)),
        params=params,
        w_max=float(header["w_max"]),
        v_mem=_decode_array(lines[3], formats["v_mem"], (e,)),
        theta=theta,
        refrac=np.array([int(t) for t in lines[5].split()], dtype=np.int64),
        formats=formats,
        lineage=header.get("lineage", {}),
    )
    return model


# -- report -------------------------------------------------------------------

REPORT_COLUMNS = [
    "dataset", "scheme", "rounding", "wfmt", "vmemfmt", "vthfmt", "acc", "mem_bits", "mem_norm",
    "e_train_J", "e_infer_J", "mu", "reward", "selected",
]


def write_report(rows, path):
    """Write candidate rows (dicts or objects with ``as_row()``) as CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_row() if hasattr(row, "as_row") else row)


def read_report(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != REPORT_COLUMNS:
            raise ValueError(f"{path}: unexpected report header {reader.fieldnames}")
        return list(reader)
