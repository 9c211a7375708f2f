import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairtime.aggregation import (
    AggregationError,
    Average,
    LinearCombo,
    Maximum,
    MaxOf,
    MeanAbsDev,
    Minimum,
    MinOf,
    Percentile,
    ThresholdExceedance,
    aggregate,
    aggregate_rows,
    base_kinds,
    exact_mean,
    format_aggregator,
    parse_aggregator,
    percentile_positions,
)

values = st.floats(-100, 100, allow_nan=False).map(lambda v: round(v, 3))
sequences = st.lists(values, min_size=1, max_size=8)
specs = st.sampled_from([
    Average(), Minimum(), Maximum(), Percentile(0.5), Percentile(0.25), Percentile(0.9),
    ThresholdExceedance(0.0), MeanAbsDev(), LinearCombo(((0.5, Minimum()), (0.5, Average()))),
    MaxOf((Minimum(), Average())), MinOf((Maximum(), Percentile(0.5))),
])


@given(specs, sequences, st.integers(1, 4))
@settings(max_examples=300, deadline=None)
def test_extension_agnostic(spec, seq, reps):
    assert aggregate(spec, seq * reps) == aggregate(spec, seq)


@given(specs, sequences, st.randoms(use_true_random=False))
@settings(max_examples=200, deadline=None)
def test_symmetric(spec, seq, rnd):
    shuffled = list(seq)
    rnd.shuffle(shuffled)
    assert aggregate(spec, shuffled) == aggregate(spec, seq)


@given(specs, st.lists(sequences, min_size=1, max_size=5).map(lambda ls: [s[:1] * 3 for s in ls]))
@settings(max_examples=100, deadline=None)
def test_rows_match_scalar(spec, rows):
    M = np.array(rows)
    expected = [aggregate(spec, r) for r in rows]
    np.testing.assert_allclose(aggregate_rows(spec, M), expected, atol=1e-9)


def test_examples():
    seq = [3.0, 1.0, 2.0, 2.0]
    assert aggregate(Average(), seq) == 2.0
    assert aggregate(Minimum(), seq) == 1.0
    assert aggregate(Maximum(), seq) == 3.0
    # rho*T = 2 is an integer: midpoint of 2nd and 3rd sorted values
    assert aggregate(Percentile(0.5), seq) == 2.0
    assert aggregate(Percentile(0.3), seq) == 2.0
    assert aggregate(Percentile(0.25), [1.0, 2.0, 3.0, 4.0]) == 1.5
    assert aggregate(ThresholdExceedance(2.0), seq) == 0.75
    assert aggregate(MeanAbsDev(), seq) == 0.5


def test_percentile_positions():
    assert percentile_positions(0.5, 4) == (2, 3)
    assert percentile_positions(0.3, 4) == (2, 2)
    assert percentile_positions(1.0, 4) == (4, 4)
    assert percentile_positions(1e-9, 4) == (1, 1)


def test_exact_mean_agrees_expanded_and_counted():
    rng = np.random.default_rng(1)
    for _ in range(200):
        v = rng.random(4)
        q = rng.integers(1, 5, 4)
        assert exact_mean(np.repeat(v, q)) == exact_mean(v, q)


def test_exact_mean_is_correctly_rounded():
    assert exact_mean([1e16, 1.0, -1e16]) == 1.0 / 3
    assert exact_mean([0.1] * 3) == 0.1


@pytest.mark.parametrize("text", [
    "avg", "min", "max", "mad", "pctl:0.5", "thresh:1.0", "combo:0.5*min+0.5*avg",
    "maxof(min,pctl:0.25)", "minof(avg,combo:0.3*max+0.7*mad)", "combo:0.5*(combo:0.5*min+0.5*max)+0.5*avg",
])
def test_parse_round_trip(text):
    spec = parse_aggregator(text)
    assert parse_aggregator(format_aggregator(spec)) == spec
    assert format_aggregator(spec) == text


@pytest.mark.parametrize("bad", ["", "median", "pctl:-0.1", "pctl:1.5", "combo:min", "maxof(min", "thresh:x"])
def test_parse_rejects(bad):
    with pytest.raises(AggregationError):
        parse_aggregator(bad)


def test_invalid_inputs():
    with pytest.raises(AggregationError):
        aggregate(Average(), [])
    with pytest.raises(AggregationError):
        aggregate(Average(), [math.inf])
    with pytest.raises(AggregationError):
        LinearCombo(())


def test_base_kinds():
    spec = parse_aggregator("maxof(min,combo:0.5*avg+0.5*pctl:0.5)")
    assert base_kinds(spec) == {Minimum, Average, Percentile}
