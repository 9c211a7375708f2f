import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairtime.aggregation import (
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
)
from fairtime.distributional import (
    DiscreteDistribution,
    dist,
    dist_aggregate,
    distribution_from_weights,
    edd_of_sequence,
    ees_of_distribution,
    lipschitz_ball,
    percentile_delta,
)

SPECS = [Average(), Minimum(), Maximum(), Percentile(0.5), Percentile(0.2), Percentile(1.0),
         ThresholdExceedance(0.5), MeanAbsDev(), LinearCombo(((0.5, Minimum()), (0.5, Average()))),
         MaxOf((Minimum(), Percentile(0.5))), MinOf((Average(), Maximum()))]


def test_edd_examples():
    d = edd_of_sequence([5.0] * 7)
    assert d.support == (5.0,) and d.probs == (1.0,) and d.counts == (7,) and d.total == 7
    d = edd_of_sequence([14, 14, 14, 0, 0, 0, 0])
    assert d.support == (0.0, 14.0) and d.counts == (4, 3)
    assert edd_of_sequence([0, 14, 0, 14, 0, 0, 14]) == d


def test_ees_examples():
    d = DiscreteDistribution.from_counts((0.0, 14.0), (4, 3))
    assert ees_of_distribution(d) == [0, 0, 0, 0, 14, 14, 14]
    assert ees_of_distribution(DiscreteDistribution.from_counts((2.0,), (3,))) == [2.0] * 3
    assert ees_of_distribution(DiscreteDistribution.from_counts((1.0, 2.0), (1, 2))) == [1.0, 2.0, 2.0]
    with pytest.raises(ValueError):
        ees_of_distribution(DiscreteDistribution((1.0, 2.0), (0.5, 0.5)))


def test_dist_examples():
    a = DiscreteDistribution((1.0, 2.0), (0.5, 0.5))
    b = DiscreteDistribution((1.0, 2.0), (0.4, 0.6))
    assert dist(a, b) == pytest.approx(0.1)
    assert dist(a, a) == 0
    assert dist(a, DiscreteDistribution((1.0, 3.0), (0.5, 0.5))) == math.inf


def test_dist_aggregate_examples():
    d = DiscreteDistribution.from_counts((0.0, 14.0), (4, 3))
    assert dist_aggregate(Average(), d) == 6.0
    assert dist_aggregate(Minimum(), d) == 0.0
    assert dist_aggregate(MeanAbsDev(), DiscreteDistribution((3.0,), (1.0,))) == 0.0
    assert dist_aggregate(Percentile(0.5), DiscreteDistribution((1.0, 2, 3, 4), (0.25,) * 4)) == 2.5


def test_distribution_validation():
    with pytest.raises(ValueError):
        DiscreteDistribution((2.0, 1.0), (0.5, 0.5))
    with pytest.raises(ValueError):
        DiscreteDistribution((1.0, 2.0), (0.5, 0.6))
    with pytest.raises(ValueError):
        DiscreteDistribution((1.0, 2.0), (1.0, 0.0))


def test_from_weights_merges_equal_values():
    d = distribution_from_weights([1.0, 2.0, 1.0, 5.0], [0.25, 0.5, 0.25, 0.0])
    assert d.support == (1.0, 2.0) and d.probs == (0.5, 0.5)
    d = distribution_from_weights([3.0, 3.0, 1.0], None, counts=[1, 2, 0])
    assert d.support == (3.0,) and d.counts == (3,)


sequences = st.lists(st.integers(-8, 8).map(lambda v: v / 4), min_size=1, max_size=9)


@given(st.sampled_from(SPECS), sequences)
@settings(max_examples=500, deadline=None)
def test_lifted_aggregation_consistent(spec, seq):
    d = edd_of_sequence(seq)
    assert abs(dist_aggregate(spec, d) - aggregate(spec, seq)) <= 1e-10
    assert aggregate(spec, ees_of_distribution(d)) == dist_aggregate(spec, d)


def test_lipschitz_ball_examples():
    d = DiscreteDistribution.from_counts((0.0, 14.0), (4, 3))
    ball = lipschitz_ball(Minimum(), d)
    assert ball.radius == pytest.approx(4 / 7) and ball.constant == 0
    d4 = DiscreteDistribution.from_counts((1.0, 2.0, 3.0, 4.0), (1, 1, 1, 1))
    assert lipschitz_ball(Percentile(0.5), d4).radius == 0
    assert percentile_delta(0.6, d4) == pytest.approx(0.1)
    assert lipschitz_ball(Percentile(0.6), d4).radius == pytest.approx(0.1 / 4)
    mad = lipschitz_ball(MeanAbsDev(), DiscreteDistribution((1.0, 3.0), (0.5, 0.5)))
    assert mad.constant == 14 and mad.radius == math.inf


@pytest.mark.parametrize("spec", [Minimum(), Maximum(), Percentile(0.3), Percentile(0.7), MeanAbsDev(),
                                  Average(), ThresholdExceedance(0.0),
                                  LinearCombo(((0.5, Minimum()), (0.5, MeanAbsDev())))])
def test_lipschitz_ball_sampled(spec):
    rng = np.random.default_rng(11)
    for _ in range(20):
        m = int(rng.integers(2, 6))
        support = np.sort(rng.choice(np.arange(-10, 11), size=m, replace=False)) / 2
        d = DiscreteDistribution(tuple(support), tuple(rng.dirichlet(np.ones(m) * 2)))
        ball = lipschitz_ball(spec, d)
        base = dist_aggregate(spec, d)
        p = np.array(d.probs)
        for _ in range(200):
            e = rng.uniform(-1, 1, m)
            e -= e.mean()
            step = min(ball.radius, 1.0) * rng.random() / np.abs(e).max()
            q = p + e * step
            if np.any(q <= 0):
                continue
            other = DiscreteDistribution(d.support, tuple(q / q.sum()))
            if not ball.contains(other):
                continue
            assert abs(dist_aggregate(spec, other) - base) <= ball.constant * dist(d, other) + 1e-9
