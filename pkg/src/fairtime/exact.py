"""Exact finite-horizon solvers.

``solve_descriptive`` enumerates every length-``T`` sequence of decisions;
``solve_pe`` enumerates multisets, i.e. count vectors ``q`` with
``sum(q) == T``, and evaluates each one through its empirical distribution.
Both report the lexicographically smallest optimal argument.

Objectives are computed on the exact path: per-stakeholder aggregates are
correctly rounded, so a schedule and its count vector give bitwise equal
values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aggregation import aggregate, aggregate_rows
from .distributional import dist_aggregate, distribution_from_weights
from .unfairness import unfairness, unfairness_rows

__all__ = [
    "Schedule",
    "CountVector",
    "FotSolution",
    "SearchSpaceError",
    "solve_descriptive",
    "solve_pe",
    "schedule_from_counts",
    "counts_from_schedule",
    "evaluate_counts",
    "evaluate_schedule",
    "compositions",
    "SEARCH_LIMIT",
]

SEARCH_LIMIT = 10 ** 7
_CHUNK = 1 << 16
_TIE_TOL = 1e-9


class SearchSpaceError(ValueError):
    pass


@dataclass(frozen=True)
class Schedule:
    T: int
    picks: tuple

    def __post_init__(self):
        picks = tuple(int(j) for j in self.picks)
        if self.T < 1 or len(picks) != self.T:
            raise ValueError("schedule needs T >= 1 picks")
        if any(j < 0 for j in picks):
            raise ValueError("picks must be non-negative indices")
        object.__setattr__(self, "picks", picks)


@dataclass(frozen=True)
class CountVector:
    T: int
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(q) for q in self.counts)
        if any(q < 0 for q in counts) or sum(counts) != self.T or self.T < 1:
            raise ValueError(f"counts {counts} must be non-negative and sum to T={self.T}")
        object.__setattr__(self, "counts", counts)

    @property
    def probs(self) -> tuple:
        return tuple(q / self.T for q in self.counts)


@dataclass(frozen=True)
class FotSolution:
    objective: float
    count_vector: CountVector
    aggregated: tuple
    schedule: Schedule | None = None
    enumerated: int = 0


def schedule_from_counts(cv: CountVector) -> Schedule:
    picks = [j for j, q in enumerate(cv.counts) for _ in range(q)]
    return Schedule(cv.T, tuple(picks))


def counts_from_schedule(s: Schedule, k: int | None = None) -> CountVector:
    k = max(s.picks) + 1 if k is None else k
    if max(s.picks) >= k:
        raise ValueError("pick outside the decision range")
    counts = [0] * k
    for j in s.picks:
        counts[j] += 1
    return CountVector(s.T, tuple(counts))


def evaluate_counts(fi, agg, unf, counts) -> tuple[float, tuple]:
    """Objective and aggregated vector of a count vector over ``fi``."""
    counts = [int(q) for q in counts]
    if len(counts) != fi.k:
        raise ValueError(f"expected {fi.k} counts, got {len(counts)}")
    y = tuple(dist_aggregate(agg, distribution_from_weights(row, counts, counts=counts))
              for row in fi.utilities)
    return unfairness(unf, y), y


def evaluate_schedule(fi, agg, unf, picks) -> tuple[float, tuple]:
    picks = list(picks)
    y = tuple(aggregate(agg, row[picks]) for row in fi.utilities)
    return unfairness(unf, y), y


def _check_T(T):
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise ValueError(f"T must be a positive integer, got {T!r}")


def solve_descriptive(fi, agg, unf, T: int, limit: int = SEARCH_LIMIT) -> FotSolution:
    """Enumerate all ``k**T`` sequences in lexicographic order."""
    _check_T(T)
    k = fi.k
    total = k ** T
    if total > limit:
        raise SearchSpaceError(f"k^T = {k}^{T} = {total} sequences exceed the limit {limit}")
    U = np.asarray(fi.utilities)
    powers = k ** np.arange(T - 1, -1, -1, dtype=np.int64)
    best_val, best_idx = math.inf, -1
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        picks = (idx[:, None] // powers) % k
        Y = np.stack([aggregate_rows(agg, U[i][picks]) for i in range(fi.n)], axis=1)
        phi = unfairness_rows(unf, Y)
        # the vectorised values only shortlist; ties are settled exactly
        near = np.flatnonzero(phi <= phi.min() + _TIE_TOL)
        seen = {}
        for r in near:
            key = tuple(np.bincount(picks[r], minlength=k))
            if key not in seen:
                seen[key] = evaluate_counts(fi, agg, unf, key)[0]
            if seen[key] < best_val:
                best_val, best_idx = seen[key], int(idx[r])
    picks = tuple(int(v) for v in (best_idx // powers) % k)
    sched = Schedule(T, picks)
    val, y = evaluate_schedule(fi, agg, unf, picks)
    return FotSolution(val, counts_from_schedule(sched, k), y, sched, total)


def compositions(T: int, k: int):
    """Count vectors of length ``k`` summing to ``T``, lexicographically."""
    if k == 1:
        yield (T,)
        return
    for q in range(T + 1):
        for rest in compositions(T - q, k - 1):
            yield (q,) + rest


def solve_pe(fi, agg, unf, T: int, limit: int = SEARCH_LIMIT) -> FotSolution:
    """Enumerate the ``C(T+k-1, k-1)`` count vectors in lexicographic order."""
    _check_T(T)
    k = fi.k
    total = math.comb(T + k - 1, k - 1)
    if total > limit:
        raise SearchSpaceError(f"C(T+k-1, k-1) = {total} count vectors exceed the limit {limit}")
    best = None
    seen = 0
    for q in compositions(T, k):
        seen += 1
        val, y = evaluate_counts(fi, agg, unf, q)
        if best is None or val < best[0]:
            best = (val, q, y)
    val, q, y = best
    cv = CountVector(T, q)
    return FotSolution(val, cv, y, schedule_from_counts(cv), seen)
