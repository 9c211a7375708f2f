"""Aggregation functions over finite utility sequences.

An aggregation function maps the utilities one stakeholder collects over
``T`` periods to a single representative value.  Every function here is
symmetric (order does not matter) and extension agnostic (repeating the
whole sequence does not change the value).

Specs are small immutable dataclasses; :func:`parse_aggregator` and
:func:`format_aggregator` convert them to and from the compact text form
used on the command line::

    avg | min | max | mad | pctl:<rho> | thresh:<h>
    combo:<w>*<spec>+<w>*<spec>...     weighted sum
    maxof(<spec>,<spec>,...)           pointwise maximum
    minof(<spec>,<spec>,...)           pointwise minimum

Nested combinators inside ``combo:`` terms must be wrapped in parentheses,
e.g. ``combo:0.5*min+0.5*(combo:1*max+-1*min)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Average",
    "Minimum",
    "Maximum",
    "Percentile",
    "ThresholdExceedance",
    "MeanAbsDev",
    "LinearCombo",
    "MaxOf",
    "MinOf",
    "AggregatorSpec",
    "AggregationError",
    "aggregate",
    "aggregate_rows",
    "base_kinds",
    "percentile_positions",
    "parse_aggregator",
    "format_aggregator",
]

INTEGER_TOL = 1e-12


class AggregationError(ValueError):
    pass


@dataclass(frozen=True)
class Average:
    pass


@dataclass(frozen=True)
class Minimum:
    pass


@dataclass(frozen=True)
class Maximum:
    pass


@dataclass(frozen=True)
class Percentile:
    rho: float

    def __post_init__(self):
        if not (0.0 <= self.rho <= 1.0) or math.isnan(self.rho):
            raise AggregationError(f"percentile rho must lie in [0, 1], got {self.rho}")


@dataclass(frozen=True)
class ThresholdExceedance:
    h: float

    def __post_init__(self):
        if not math.isfinite(self.h):
            raise AggregationError("threshold must be finite")


@dataclass(frozen=True)
class MeanAbsDev:
    pass


@dataclass(frozen=True)
class LinearCombo:
    terms: tuple  # of (weight, spec)

    def __post_init__(self):
        terms = tuple((float(w), s) for w, s in self.terms)
        if not terms:
            raise AggregationError("LinearCombo needs at least one term")
        for w, _ in terms:
            if not math.isfinite(w):
                raise AggregationError("LinearCombo weights must be finite")
        object.__setattr__(self, "terms", terms)


@dataclass(frozen=True)
class MaxOf:
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise AggregationError("MaxOf needs at least one part")


@dataclass(frozen=True)
class MinOf:
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise AggregationError("MinOf needs at least one part")


AggregatorSpec = Union[
    Average, Minimum, Maximum, Percentile, ThresholdExceedance, MeanAbsDev,
    LinearCombo, MaxOf, MinOf,
]

_BASE = (Average, Minimum, Maximum, Percentile, ThresholdExceedance, MeanAbsDev)


def base_kinds(spec) -> set:
    """Set of base spec classes appearing anywhere inside ``spec``."""
    if isinstance(spec, _BASE):
        return {type(spec)}
    if isinstance(spec, LinearCombo):
        children = [s for _, s in spec.terms]
    elif isinstance(spec, (MaxOf, MinOf)):
        children = list(spec.parts)
    else:
        raise AggregationError(f"unknown aggregator spec {spec!r}")
    out = set()
    for child in children:
        out |= base_kinds(child)
    return out


def percentile_positions(rho: float, T: int) -> tuple[int, int]:
    """1-based positions ``(a, b)`` in the sorted sequence; the percentile is
    ``(w_a + w_b) / 2`` (``a == b`` outside the midpoint branch)."""
    rt = rho * T
    m = round(rt)
    if abs(rt - m) <= INTEGER_TOL * max(1.0, rt):
        if m <= 0:
            return 1, 1
        if m >= T:
            return T, T
        return m, m + 1
    c = math.ceil(rt)
    return c, c


def exact_mean(values: Sequence[float], counts: Sequence[int] | None = None) -> float:
    # exact rational mean rounded once: identical for a multiset given
    # expanded, as (value, count) pairs, or repeated any number of times
    if counts is None:
        total = sum(map(Fraction, values), Fraction(0))
        T = len(values)
    else:
        total = sum((Fraction(v) * q for v, q in zip(values, counts)), Fraction(0))
        T = sum(counts)
    return float(total / T)


def _mad(values: Sequence[float], counts: Sequence[int] | None = None) -> float:
    m = exact_mean(values, counts)
    devs = [abs(v - m) for v in values]
    return exact_mean(devs, counts)


def aggregate(spec, seq) -> float:
    """Evaluate ``spec`` on a non-empty finite sequence."""
    values = [float(v) for v in seq]
    if not values:
        raise AggregationError("cannot aggregate an empty sequence")
    if not all(math.isfinite(v) for v in values):
        raise AggregationError("sequence entries must be finite")
    return _aggregate(spec, values)


def _aggregate(spec, values: list) -> float:
    T = len(values)
    if isinstance(spec, Average):
        return exact_mean(values)
    if isinstance(spec, Minimum):
        return min(values)
    if isinstance(spec, Maximum):
        return max(values)
    if isinstance(spec, Percentile):
        w = sorted(values)
        a, b = percentile_positions(spec.rho, T)
        return w[a - 1] if a == b else (w[a - 1] + w[b - 1]) / 2
    if isinstance(spec, ThresholdExceedance):
        return sum(1 for v in values if v >= spec.h) / T
    if isinstance(spec, MeanAbsDev):
        return _mad(values)
    if isinstance(spec, LinearCombo):
        return combine_linear(spec, [_aggregate(s, values) for _, s in spec.terms])
    if isinstance(spec, MaxOf):
        return max(_aggregate(s, values) for s in spec.parts)
    if isinstance(spec, MinOf):
        return min(_aggregate(s, values) for s in spec.parts)
    raise AggregationError(f"unknown aggregator spec {spec!r}")


def combine_linear(spec: LinearCombo, parts: Sequence[float]) -> float:
    total = 0.0
    for (w, _), v in zip(spec.terms, parts):
        total += w * v
    return total


def aggregate_rows(spec, rows: np.ndarray) -> np.ndarray:
    """Vectorised :func:`aggregate` over the rows of a 2-D array.

    Agrees with the scalar path to rounding error (not bitwise).
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] == 0:
        raise AggregationError("rows must be a non-empty 2-D array")
    T = rows.shape[1]
    if isinstance(spec, Average):
        return rows.mean(axis=1)
    if isinstance(spec, Minimum):
        return rows.min(axis=1)
    if isinstance(spec, Maximum):
        return rows.max(axis=1)
    if isinstance(spec, Percentile):
        w = np.sort(rows, axis=1)
        a, b = percentile_positions(spec.rho, T)
        return (w[:, a - 1] + w[:, b - 1]) / 2
    if isinstance(spec, ThresholdExceedance):
        return (rows >= spec.h).sum(axis=1) / T
    if isinstance(spec, MeanAbsDev):
        m = rows.mean(axis=1, keepdims=True)
        return np.abs(rows - m).mean(axis=1)
    if isinstance(spec, LinearCombo):
        out = np.zeros(rows.shape[0])
        for w, s in spec.terms:
            out = out + w * aggregate_rows(s, rows)
        return out
    if isinstance(spec, MaxOf):
        return np.max([aggregate_rows(s, rows) for s in spec.parts], axis=0)
    if isinstance(spec, MinOf):
        return np.min([aggregate_rows(s, rows) for s in spec.parts], axis=0)
    raise AggregationError(f"unknown aggregator spec {spec!r}")


# -- text form ---------------------------------------------------------------

_SIMPLE = {"avg": Average(), "min": Minimum(), "max": Maximum(), "mad": MeanAbsDev()}


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise AggregationError(f"unbalanced parentheses in {text!r}")
        elif ch == sep and depth == 0:
            # a '+' directly after '*' or 'e' is a sign, not a separator
            if sep == "+" and i > 0 and text[i - 1] in "*eE(":
                continue
            parts.append(text[start:i])
            start = i + 1
    if depth != 0:
        raise AggregationError(f"unbalanced parentheses in {text!r}")
    parts.append(text[start:])
    return parts


def _closing_paren(text: str, start: int) -> int:
    depth = 0
    for i in range(start, len(text)):
        depth += text[i] == "("
        depth -= text[i] == ")"
        if depth == 0:
            return i
    return -1


def _number(text: str, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise AggregationError(f"bad {what} {text!r}") from None
    if not math.isfinite(value):
        raise AggregationError(f"{what} must be finite")
    return value


def parse_aggregator(text: str):
    """Parse the compact text form into a spec."""
    s = text.strip().replace(" ", "")
    if not s:
        raise AggregationError("empty aggregator")
    if s.startswith("(") and _closing_paren(s, 0) == len(s) - 1:
        return parse_aggregator(s[1:-1])
    if s in _SIMPLE:
        return _SIMPLE[s]
    if s.startswith("pctl:"):
        return Percentile(_number(s[5:], "percentile"))
    if s.startswith("thresh:"):
        return ThresholdExceedance(_number(s[7:], "threshold"))
    if s.startswith("combo:"):
        terms = []
        for term in _split_top(s[6:], "+"):
            if "*" not in term:
                raise AggregationError(f"combo term {term!r} needs the form <weight>*<spec>")
            w, _, rest = term.partition("*")
            terms.append((_number(w, "weight"), parse_aggregator(rest)))
        return LinearCombo(tuple(terms))
    for prefix, cls in (("maxof(", MaxOf), ("minof(", MinOf)):
        if s.startswith(prefix):
            if not s.endswith(")"):
                raise AggregationError(f"missing ')' in {text!r}")
            parts = _split_top(s[len(prefix):-1], ",")
            return cls(tuple(parse_aggregator(p) for p in parts))
    raise AggregationError(f"unknown aggregator {text!r}")


def format_aggregator(spec) -> str:
    """Inverse of :func:`parse_aggregator`."""
    for key, value in _SIMPLE.items():
        if spec == value:
            return key
    if isinstance(spec, Percentile):
        return f"pctl:{spec.rho!r}"
    if isinstance(spec, ThresholdExceedance):
        return f"thresh:{spec.h!r}"
    if isinstance(spec, LinearCombo):
        terms = []
        for w, s in spec.terms:
            inner = format_aggregator(s)
            if isinstance(s, LinearCombo):
                inner = f"({inner})"
            terms.append(f"{w!r}*{inner}")
        return "combo:" + "+".join(terms)
    if isinstance(spec, MaxOf):
        return "maxof(" + ",".join(format_aggregator(p) for p in spec.parts) + ")"
    if isinstance(spec, MinOf):
        return "minof(" + ",".join(format_aggregator(p) for p in spec.parts) + ")"
    raise AggregationError(f"unknown aggregator spec {spec!r}")
