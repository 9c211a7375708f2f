import numpy as np
import pytest

from fairtime.aggregation import Average, Maximum, MeanAbsDev, Minimum, Percentile, ThresholdExceedance, aggregate
from fairtime.distributional import dist_aggregate, distribution_from_weights
from fairtime.encodings import (
    EncodingError,
    Witness,
    brute_force_binaries,
    default_bigm,
    encode_prob_agg,
    encode_sequence_agg,
    prob_witness,
    sequence_witness,
    witness_check,
)
from fairtime.lp import read_lp

SEQ_SPECS = [Average(), Minimum(), Maximum(), Percentile(0.5), Percentile(0.3), Percentile(1.0),
             ThresholdExceedance(2.0), MeanAbsDev()]


def test_forced_values():
    assert brute_force_binaries(encode_sequence_agg(ThresholdExceedance(2.0), [3, 1, 2])) == [pytest.approx(2 / 3)]
    assert brute_force_binaries(encode_sequence_agg(MeanAbsDev(), [4.0, 4.0])) == [0.0]
    assert brute_force_binaries(encode_sequence_agg(Minimum(), [3, 1, 2])) == [1.0]
    assert brute_force_binaries(encode_sequence_agg(Percentile(0.5), [1, 2])) == [1.5]


def test_prob_forced_values():
    cs = encode_prob_agg(ThresholdExceedance(2.0), [3, 1, 2])
    assert brute_force_binaries(cs, {"p0": 0.5, "p1": 0.25, "p2": 0.25}) == [pytest.approx(0.75)]
    cs = encode_prob_agg(MeanAbsDev(), [3, 1, 2])
    assert brute_force_binaries(cs, {"p0": 0.0, "p1": 1.0, "p2": 0.0}) == [0.0]


def test_infeasible_system_is_empty():
    cs = encode_sequence_agg(Minimum(), [3, 1, 2])
    assert brute_force_binaries(cs, {"y": (5.0, 6.0)}) == []


@pytest.mark.parametrize("spec", SEQ_SPECS)
def test_sequence_encodings_exhaustive(spec):
    rng = np.random.default_rng(hash(repr(spec)) % 2 ** 32)
    for _ in range(30):
        seq = list(rng.integers(0, 5, size=rng.integers(1, 5)) / 2)
        cs = encode_sequence_agg(spec, seq)
        assert witness_check(cs, sequence_witness(cs, spec, seq))
        found = brute_force_binaries(cs)
        assert len(found) == 1 and found[0] == pytest.approx(aggregate(spec, seq), abs=1e-9)


@pytest.mark.parametrize("spec", [Average(), Minimum(), ThresholdExceedance(1.0), MeanAbsDev()])
def test_prob_encodings_exhaustive(spec):
    rng = np.random.default_rng(7)
    for _ in range(30):
        k = int(rng.integers(1, 5))
        u = rng.integers(0, 5, size=k) / 2
        p = rng.dirichlet(np.ones(k))
        p[rng.random(k) < 0.3] = 0
        if p.sum() == 0:
            p[0] = 1
        p = p / p.sum()
        p = np.where((p > 0) & (p < 1e-3), 1e-3, p)
        p = p / p.sum()
        cs = encode_prob_agg(spec, u)
        assert witness_check(cs, prob_witness(cs, spec, u, p))
        found = brute_force_binaries(cs, {f"p{j}": float(p[j]) for j in range(k)})
        expected = dist_aggregate(spec, distribution_from_weights(u, p))
        assert len(found) == 1 and found[0] == pytest.approx(expected, abs=1e-9)


def test_witness_check_names_violation():
    cs = encode_sequence_agg(Minimum(), [3, 1, 2])
    w = sequence_witness(cs, Minimum(), [3, 1, 2])
    w.continuous_values[0] += 1
    res = witness_check(cs, w)
    assert not res and res.label == "hi1"  # y = 2 exceeds u_1 = 1


def test_witness_check_rejects_fractional_binary():
    cs = encode_sequence_agg(Minimum(), [3, 1, 2])
    w = sequence_witness(cs, Minimum(), [3, 1, 2])
    w = Witness(w.continuous_values, np.where(np.arange(3) == 0, 0.5, w.binary_values))
    res = witness_check(cs, w)
    assert not res and res.label == "b0" and "0/1" in res.reason


def test_shrunken_bigm_is_detected():
    seq = [0.0, 4.0, 2.0]
    spec = Minimum()
    good = encode_sequence_agg(spec, seq)
    assert good.bigM == default_bigm(spec, seq) == 5.0
    bad = encode_sequence_agg(spec, seq, bigM=0.5 * 4.0)
    res = witness_check(bad, sequence_witness(bad, spec, seq))
    assert not res and res.label.startswith("lo")
    assert brute_force_binaries(bad) == []


def test_lp_text_reads_back():
    cs = encode_sequence_agg(Percentile(0.5), [1.0, 3.0])
    p, binaries = read_lp(cs.to_lp_text(comment="percentile"))
    assert p.c.size == cs.num_vars
    assert len(binaries) == cs.num_binary


def test_errors():
    with pytest.raises(EncodingError):
        encode_sequence_agg(Average(), [])
    with pytest.raises(EncodingError):
        encode_prob_agg(Percentile(0.5), [1.0])
    cs = encode_prob_agg(MeanAbsDev(), [1.0, 2.0])
    with pytest.raises(EncodingError):
        brute_force_binaries(cs)
