import csv
import gzip
import struct

import numpy as np
import pytest

from tinysnn.dataio import (
    REPORT_COLUMNS, BadMagicError, CountMismatchError, ModelFormatError, TruncatedFileError, load_idx,
    load_model, read_report, save_model, write_idx, write_report,
)
from tinysnn.fixedpoint import FixedPointFormat
from tinysnn.network import LayerParams, NetworkModel
from tinysnn.quantization import QuantConfig, apply_ptq
from tinysnn.selection import CandidateReport


def _write(path, data):
    path.write_bytes(data)
    return path


def test_hand_built_single_image(tmp_path):
    img = _write(tmp_path / "i", struct.pack(">IIII", 0x803, 1, 28, 28) + bytes(784))
    lab = _write(tmp_path / "l", struct.pack(">II", 0x801, 1) + bytes([7]))
    ds = load_idx(img, lab)
    assert ds.images.shape == (1, 28, 28) and ds.images.dtype == np.uint8
    assert not ds.images.any()
    assert ds.labels.tolist() == [7]


def test_swapped_files(tmp_path):
    img = _write(tmp_path / "i", struct.pack(">IIII", 0x803, 1, 2, 2) + bytes(4))
    lab = _write(tmp_path / "l", struct.pack(">II", 0x801, 1) + bytes([3]))
    with pytest.raises(BadMagicError, match="offset 0"):
        load_idx(lab, img)


def test_count_mismatch(tmp_path):
    img = _write(tmp_path / "i", struct.pack(">IIII", 0x803, 2, 2, 2) + bytes(8))
    lab = _write(tmp_path / "l", struct.pack(">II", 0x801, 1) + bytes([3]))
    with pytest.raises(CountMismatchError):
        load_idx(img, lab)


@pytest.mark.parametrize("cut", [2, 10, 18])
def test_truncated(tmp_path, cut):
    full = struct.pack(">IIII", 0x803, 1, 2, 2) + bytes(4)
    img = _write(tmp_path / "i", full[:cut])
    lab = _write(tmp_path / "l", struct.pack(">II", 0x801, 1) + bytes([3]))
    with pytest.raises(TruncatedFileError, match=f"offset {cut}"):
        load_idx(img, lab)


def test_gzip_and_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, (5, 3, 4), dtype=np.uint8)
    labels = rng.integers(0, 10, 5, dtype=np.uint8)
    write_idx(images, labels, tmp_path / "i", tmp_path / "l")
    _write(tmp_path / "i.gz", gzip.compress((tmp_path / "i").read_bytes()))
    for img in ("i", "i.gz"):
        ds = load_idx(tmp_path / img, tmp_path / "l")
        np.testing.assert_array_equal(ds.images, images)
        np.testing.assert_array_equal(ds.labels, labels)
    assert len(ds.subset(1, 3)) == 2


def _model():
    rng = np.random.default_rng(4)
    m = NetworkModel(rng.random((6, 3)) * 0.7, LayerParams())
    m.v_mem[:] = [-61.25, -64.0, -52.5]
    m.theta[:] = rng.random(3) * 3
    m.refrac[:] = [0, 2, 1]
    m.lineage = {"seed": 3}
    return m


def _assert_same(a, b):
    for name in ("weights", "v_mem", "theta", "refrac"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert a.params == b.params and a.formats == b.formats and a.lineage == b.lineage
    assert a.w_max == b.w_max


def test_model_round_trip_fp32(tmp_path):
    m = _model()
    save_model(m, tmp_path / "m.txt")
    _assert_same(m, load_model(tmp_path / "m.txt"))


def test_model_round_trip_quantized(tmp_path):
    m = _model()
    cfg = QuantConfig("ptq", "nearest", {"weights": FixedPointFormat(False, 0, 8),
                                         "v_mem": FixedPointFormat(True, 7, 4),
                                         "v_thresh": FixedPointFormat(True, 7, 4)}, "qWN")
    q = apply_ptq(m, cfg)
    save_model(q, tmp_path / "q.txt")
    back = load_model(tmp_path / "q.txt")
    _assert_same(q, back)
    save_model(back, tmp_path / "q2.txt")
    assert (tmp_path / "q.txt").read_bytes() == (tmp_path / "q2.txt").read_bytes()


def test_model_version_rejected(tmp_path):
    save_model(_model(), tmp_path / "m.txt")
    text = (tmp_path / "m.txt").read_text().replace("tinysnn-model 1", "tinysnn-model 9", 1)
    (tmp_path / "m.txt").write_text(text)
    with pytest.raises(ModelFormatError, match="version 9"):
        load_model(tmp_path / "m.txt")
    (tmp_path / "x.txt").write_text("hello\n")
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "x.txt")


def test_report_strict_csv(tmp_path):
    cfg = QuantConfig("ptq", "truncate", {"weights": FixedPointFormat(False, 1, 7)}, "qW")
    rows = [CandidateReport(cfg, 0.9, 2_534_400, 10_060_800, 1e-3, 2e-5, 0.01, "mnist", True),
            CandidateReport(QuantConfig("itq", "nearest", {"weights": FixedPointFormat(False, 1, 3)}, "qW"),
                            0.8, 1_280_000, 10_060_800, 5e-4, 1e-5, 0.01, "mnist")]
    write_report(rows, tmp_path / "r.csv")
    with open(tmp_path / "r.csv", newline="") as fh:
        parsed = list(csv.reader(fh, strict=True))
    assert parsed[0] == REPORT_COLUMNS
    assert len(parsed) == 3 and all(len(r) == len(REPORT_COLUMNS) for r in parsed)
    first = dict(zip(parsed[0], parsed[1]))
    assert int(first["mem_bits"]) == 2_534_400
    assert float(first["mem_norm"]) == pytest.approx(2_534_400 / 10_060_800)
    assert float(first["reward"]) == pytest.approx(0.9 - 0.01 * 2_534_400 / 10_060_800)
    assert read_report(tmp_path / "r.csv") == [dict(zip(parsed[0], r)) for r in parsed[1:]]


def test_report_header_checked(tmp_path):
    (tmp_path / "r.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        read_report(tmp_path / "r.csv")
