import numpy as np
import pytest

from tinysnn.encoding import SpikeTrain
from tinysnn.fixedpoint import FixedPointFormat
from tinysnn.learning import LearnConfig, train_network
from tinysnn.network import LayerParams, NetworkModel
from tinysnn.quantization import (
    GROUP_SETS, GroupRange, QuantConfig, RangeReport, apply_ptq, observe_ranges, recommended_int_bits,
    sweep_fractional_bits, train_itq,
)
from tinysnn.evaluation import labels_from_counts

QU08 = FixedPointFormat(False, 0, 8)
PARAMS = LayerParams(v_rest=0.0, v_reset=0.0, v_thresh_base=0.5, tau_mem=100.0, theta_inc=0.05,
                     tau_theta=1e5, t_refrac=2, w_inh=0.1)


@pytest.mark.parametrize("lo, hi, bits", [(0, 1, 1), (0, 7.5, 4), (0, 0, 0), (-3, 2, 2), (0, 0.99, 1)])
def test_int_bits(lo, hi, bits):
    assert recommended_int_bits(lo, hi) == bits


def test_format_for_range():
    rr = RangeReport({"weights": GroupRange(0.0, 1.0), "v_mem": GroupRange(-70.0, -40.0),
                      "v_thresh": GroupRange(-52.0, -45.0)})
    assert str(rr.format_for("weights", 8)) == "qu1.7"
    assert str(rr.format_for("v_mem", 8)) == "qs7.0"
    assert str(rr.format_for("v_mem", 16)) == "qs7.8"
    cfg = rr.config_for("ptq", "truncate", 8, "qWN")
    assert set(cfg.formats) == {"weights", "v_mem", "v_thresh"}
    assert rr.config_for("ptq", "truncate", 8, "qW").formats["v_mem"] is None


def test_two_by_two_truncate():
    m = NetworkModel(np.array([[0.3, 0.7], [1.0, 0.0]]), PARAMS)
    q = apply_ptq(m, QuantConfig("ptq", "truncate", {"weights": QU08}, "qW"))
    np.testing.assert_array_equal(q.weights, [[76 / 256, 179 / 256], [255 / 256, 0.0]])
    assert q.formats["weights"] == QU08
    assert m.weights[0, 0] == 0.3 and m.formats["weights"] is None


def test_ptq_idempotent():
    rng = np.random.default_rng(0)
    m = NetworkModel(rng.random((5, 4)), PARAMS)
    m.theta[:] = rng.random(4)
    cfg = QuantConfig("ptq", "nearest", {"weights": FixedPointFormat(False, 1, 5),
                                         "v_mem": FixedPointFormat(True, 2, 4),
                                         "v_thresh": FixedPointFormat(False, 2, 4)}, "qWN")
    once = apply_ptq(m, cfg)
    twice = apply_ptq(once, cfg)
    for name in ("weights", "v_mem", "theta"):
        np.testing.assert_array_equal(getattr(once, name), getattr(twice, name))
    assert once.params == twice.params
    assert cfg.formats["v_thresh"].contains(once.v_thresh)


def test_ptq_guards():
    m = NetworkModel(np.full((2, 2), 0.5), PARAMS)
    with pytest.raises(ValueError):
        apply_ptq(m, QuantConfig("itq", "truncate", {"weights": QU08}, "qW"))
    with pytest.raises(ValueError, match="seeded"):
        apply_ptq(m, QuantConfig("ptq", "stochastic", {"weights": QU08}, "qW"))
    with pytest.raises(ValueError):
        QuantConfig("ptq", "truncate", {"weights": QU08, "v_mem": QU08}, "qW")
    assert set(GROUP_SETS) >= {"qW", "qWN", "fp32"}


def test_stochastic_reproducible():
    m = NetworkModel(np.random.default_rng(1).random((20, 5)), PARAMS)
    cfg = QuantConfig("ptq", "stochastic", {"weights": FixedPointFormat(False, 1, 3)}, "qW")
    a = apply_ptq(m, cfg, np.random.default_rng(9))
    b = apply_ptq(m, cfg, np.random.default_rng(9))
    c = apply_ptq(m, cfg, np.random.default_rng(10))
    np.testing.assert_array_equal(a.weights, b.weights)
    assert not np.array_equal(a.weights, c.weights)


def _stream(n=6, n_in=4, steps=30, seed=5):
    rng = np.random.default_rng(seed)
    return [(SpikeTrain(rng.random((n_in, steps)) < 0.5), i % 2) for i in range(n)]


def _fresh():
    return NetworkModel(np.random.default_rng(2).random((4, 3)) * 0.4, PARAMS)


LEARN = LearnConfig(eta_post=0.05, n_th=2, update_period=5, norm_target=1.0)


def test_itq_fp32_groups_equals_plain_training():
    plain = train_network(_fresh(), _stream(), LEARN)
    itq = train_itq(_fresh(), _stream(), LEARN, QuantConfig("itq", "truncate", {}, "fp32"))
    np.testing.assert_array_equal(plain.weights, itq.weights)
    np.testing.assert_array_equal(plain.theta, itq.theta)


def test_itq_matches_floor_replay():
    # replay with a hand-written floor to the qu0.4 grid after every update
    fmt = FixedPointFormat(False, 0, 4)
    start = _fresh()
    start.weights = np.floor(start.weights * 16) / 16

    def floor_grid(m):
        m.weights = np.clip(np.floor(m.weights * 16) / 16, 0.0, 15 / 16)

    replay = train_network(start.copy(), _stream(), LEARN, after_update=floor_grid)
    itq = train_itq(start, _stream(), LEARN, QuantConfig("itq", "truncate", {"weights": fmt}, "qW"))
    np.testing.assert_array_equal(itq.weights, replay.weights)
    assert fmt.contains(itq.weights)
    assert itq.lineage["quant"]["scheme"] == "itq"


def test_observe_ranges_and_sweep():
    m = NetworkModel(np.full((4, 3), 0.3), PARAMS)
    stream = _stream(8)
    rr = observe_ranges(m, stream)
    assert rr["weights"].min == rr["weights"].max == 0.3
    assert rr["v_mem"].min <= 0.0 and rr["v_mem"].max >= 0.3
    with pytest.raises(ValueError):
        observe_ranges(m, [])
    lm = labels_from_counts(np.eye(2, 3)[[0, 1]], [0, 1], num_classes=2)
    rows = sweep_fractional_bits(m, lm, stream, "weights", [2, 4, 6], "truncate")
    assert [f for f, _ in rows] == [2, 4, 6]
    assert all(0.0 <= acc <= 1.0 for _, acc in rows)
    with pytest.raises(ValueError):
        sweep_fractional_bits(m, lm, stream, "bogus", [2], "truncate")
