"""Aggregation on the probability side.

A utility sequence is summarised by its empirical distribution (the EDD):
the sorted unique values together with their frequencies.  Because every
aggregation function is symmetric and extension agnostic, its value depends
on the sequence only through this distribution, so :func:`dist_aggregate`
can evaluate it directly from probabilities.  For the supported families the
closed forms are valid for real (not only rational) probabilities.

``dist`` compares two distributions on the same support by their largest
coordinate gap; distributions on different supports are infinitely far
apart.  :func:`lipschitz_ball` reports a ball around a distribution on which
the real-valued extension is Lipschitz in that metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .aggregation import (
    AggregationError,
    Average,
    LinearCombo,
    MaxOf,
    MeanAbsDev,
    Maximum,
    MinOf,
    Minimum,
    Percentile,
    ThresholdExceedance,
    combine_linear,
    exact_mean,
    percentile_positions,
)

__all__ = [
    "DiscreteDistribution",
    "LipschitzBall",
    "edd_of_sequence",
    "ees_of_distribution",
    "distribution_from_weights",
    "dist",
    "dist_aggregate",
    "lipschitz_ball",
]

SUM_TOL = 1e-12
CUMULATIVE_TOL = 1e-12
MERGE_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteDistribution:
    support: tuple
    probs: tuple
    counts: tuple | None = None
    total: int | None = None

    def __post_init__(self):
        support = tuple(float(v) for v in self.support)
        probs = tuple(float(p) for p in self.probs)
        if not support or len(support) != len(probs):
            raise ValueError("support and probs must be non-empty and of equal length")
        if any(b <= a for a, b in zip(support, support[1:])):
            raise ValueError("support must be strictly increasing")
        if not all(math.isfinite(v) for v in support):
            raise ValueError("support values must be finite")
        if any(not p > 0 for p in probs):
            raise ValueError("probabilities must be positive")
        if self.counts is not None:
            counts = tuple(int(q) for q in self.counts)
            total = int(self.total if self.total is not None else sum(counts))
            if len(counts) != len(support) or any(q <= 0 for q in counts) or sum(counts) != total:
                raise ValueError("rational form must have positive counts summing to total")
            if any(abs(p - q / total) > 1e-12 for p, q in zip(probs, counts)):
                raise ValueError("rational form inconsistent with probs")
            object.__setattr__(self, "counts", counts)
            object.__setattr__(self, "total", total)
        elif abs(math.fsum(probs) - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {math.fsum(probs)!r}, not 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_counts(cls, support, counts) -> "DiscreteDistribution":
        total = sum(counts)
        return cls(tuple(support), tuple(q / total for q in counts), tuple(counts), total)

    @property
    def m(self) -> int:
        return len(self.support)

    @property
    def is_rational(self) -> bool:
        return self.counts is not None


@dataclass(frozen=True)
class LipschitzBall:
    center: DiscreteDistribution
    radius: float
    constant: float

    def __post_init__(self):
        if not self.radius >= 0 or not self.constant >= 0:
            raise ValueError("radius and constant must be non-negative")

    def contains(self, other: DiscreteDistribution) -> bool:
        return dist(self.center, other) < self.radius


def edd_of_sequence(seq, tol: float = MERGE_TOL) -> DiscreteDistribution:
    """Empirical distribution of a sequence, with exact counts.

    Values closer than ``tol`` to the first value of their group are merged
    into it.
    """
    values = sorted(float(v) for v in seq)
    if not values:
        raise ValueError("empty sequence")
    support, counts = [values[0]], [1]
    for v in values[1:]:
        if v - support[-1] <= tol * max(1.0, abs(support[-1])):
            counts[-1] += 1
        else:
            support.append(v)
            counts.append(1)
    return DiscreteDistribution.from_counts(support, counts)


def ees_of_distribution(d: DiscreteDistribution) -> list:
    """Canonical sorted sequence whose empirical distribution is ``d``."""
    if not d.is_rational:
        raise ValueError("distribution has no rational form")
    out = []
    for v, q in zip(d.support, d.counts):
        out.extend([v] * q)
    return out


def distribution_from_weights(values: Sequence[float], weights: Sequence, counts=None):
    """Merge per-decision probabilities into a distribution over values.

    ``values[j]`` is the utility of decision ``j`` and ``weights[j]`` its
    probability; zero-weight decisions are dropped and equal utilities are
    combined.  If ``counts`` is given the result carries the rational form.
    """
    if counts is not None:
        acc = {}
        for v, q in zip(values, counts):
            if q > 0:
                acc[float(v)] = acc.get(float(v), 0) + int(q)
        keys = sorted(acc)
        return DiscreteDistribution.from_counts(keys, [acc[v] for v in keys])
    acc = {}
    for v, w in zip(values, weights):
        if w > 0:
            acc.setdefault(float(v), []).append(float(w))
    keys = sorted(acc)
    probs = [math.fsum(acc[v]) for v in keys]
    s = math.fsum(probs)
    return DiscreteDistribution(tuple(keys), tuple(p / s for p in probs))


def dist(p1: DiscreteDistribution, p2: DiscreteDistribution) -> float:
    if p1.support != p2.support:
        return math.inf
    return max(abs(a - b) for a, b in zip(p1.probs, p2.probs))


def dist_aggregate(spec, d: DiscreteDistribution) -> float:
    """Evaluate an aggregation function on a distribution.

    Rational distributions reproduce :func:`aggregate` on the enumeration
    sequence bit for bit.
    """
    if isinstance(spec, Average):
        if d.is_rational:
            return exact_mean(d.support, d.counts)
        return math.fsum(p * v for p, v in zip(d.probs, d.support))
    if isinstance(spec, Minimum):
        return d.support[0]
    if isinstance(spec, Maximum):
        return d.support[-1]
    if isinstance(spec, Percentile):
        return _percentile(spec.rho, d)
    if isinstance(spec, ThresholdExceedance):
        if d.is_rational:
            return sum(q for v, q in zip(d.support, d.counts) if v >= spec.h) / d.total
        return math.fsum(p for v, p in zip(d.support, d.probs) if v >= spec.h)
    if isinstance(spec, MeanAbsDev):
        if d.is_rational:
            m = exact_mean(d.support, d.counts)
            return exact_mean([abs(v - m) for v in d.support], d.counts)
        m = math.fsum(p * v for p, v in zip(d.probs, d.support))
        return math.fsum(p * abs(v - m) for p, v in zip(d.probs, d.support))
    if isinstance(spec, LinearCombo):
        return combine_linear(spec, [dist_aggregate(s, d) for _, s in spec.terms])
    if isinstance(spec, MaxOf):
        return max(dist_aggregate(s, d) for s in spec.parts)
    if isinstance(spec, MinOf):
        return min(dist_aggregate(s, d) for s in spec.parts)
    raise AggregationError(f"unsupported aggregator {spec!r}")


def _value_at(d: DiscreteDistribution, pos: int) -> float:
    acc = 0
    for v, q in zip(d.support, d.counts):
        acc += q
        if pos <= acc:
            return v
    return d.support[-1]


def _percentile(rho: float, d: DiscreteDistribution) -> float:
    if d.is_rational:
        a, b = percentile_positions(rho, d.total)
        va = _value_at(d, a)
        return va if a == b else (va + _value_at(d, b)) / 2
    cum = 0.0
    for j, p in enumerate(d.probs):
        cum += p
        if cum >= rho - CUMULATIVE_TOL:
            if abs(cum - rho) <= CUMULATIVE_TOL and j < d.m - 1:
                return (d.support[j] + d.support[j + 1]) / 2
            return d.support[j]
    return d.support[-1]


def _cumulative(d: DiscreteDistribution) -> list:
    if d.is_rational:
        out, acc = [], 0
        for q in d.counts:
            acc += q
            out.append(Fraction(acc, d.total))
        return out
    out, acc = [], 0.0
    for p in d.probs:
        acc += p
        out.append(acc)
    return out


def percentile_delta(rho: float, d: DiscreteDistribution) -> float:
    """Margin of ``rho`` from the cumulative boundaries (0 on a boundary)."""
    cum = _cumulative(d)
    r = Fraction(rho) if d.is_rational else rho
    terms = [min(d.probs)]
    prev = 0
    for j in range(d.m - 1):
        terms.append(abs(r - prev))
        terms.append(abs(cum[j] - r))
        prev = cum[j]
    delta = float(min(terms))
    return 0.0 if delta <= CUMULATIVE_TOL else delta


def _pairing_bound(values: Sequence[float]) -> float:
    # sup of |sum_j e_j v_j| over |e_j| <= 1, sum_j e_j = 0
    v = sorted(values)
    m = len(v)
    return math.fsum(v[m - 1 - t] - v[t] for t in range(m // 2))


def lipschitz_ball(spec, d: DiscreteDistribution) -> LipschitzBall:
    """Ball around ``d`` on which the extension of ``spec`` is Lipschitz.

    Minimum, maximum and percentile are locally constant; mean absolute
    deviation uses the bound ``2 |v|_1 + m max_j |v_j|``.  Average and
    threshold exceedance are linear in the probabilities, and combinators
    combine their parts' balls.
    """
    if isinstance(spec, Minimum):
        return LipschitzBall(d, d.probs[0], 0.0)
    if isinstance(spec, Maximum):
        return LipschitzBall(d, d.probs[-1], 0.0)
    if isinstance(spec, Percentile):
        return LipschitzBall(d, percentile_delta(spec.rho, d) / d.m, 0.0)
    if isinstance(spec, MeanAbsDev):
        l1 = math.fsum(abs(v) for v in d.support)
        return LipschitzBall(d, math.inf, 2 * l1 + d.m * max(abs(v) for v in d.support))
    if isinstance(spec, Average):
        return LipschitzBall(d, math.inf, _pairing_bound(d.support))
    if isinstance(spec, ThresholdExceedance):
        above = sum(1 for v in d.support if v >= spec.h)
        return LipschitzBall(d, math.inf, float(min(above, d.m - above)))
    if isinstance(spec, LinearCombo):
        balls = [lipschitz_ball(s, d) for _, s in spec.terms]
        return LipschitzBall(d, min(b.radius for b in balls),
                             math.fsum(abs(w) * b.constant for (w, _), b in zip(spec.terms, balls)))
    if isinstance(spec, (MaxOf, MinOf)):
        balls = [lipschitz_ball(s, d) for s in spec.parts]
        return LipschitzBall(d, min(b.radius for b in balls), max(b.constant for b in balls))
    raise AggregationError(f"no Lipschitz ball for {spec!r}")
