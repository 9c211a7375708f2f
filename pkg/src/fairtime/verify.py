"""Seeded property suites behind ``fairtime verify``.

Each suite returns one :class:`CaseRow` per checked case.  Rows share the
CSV layout ``case,method,T,phi,phi_hat,L,bound_ok,wall_ms``; what ``phi``
and ``phi_hat`` hold depends on the suite (see each function).  Floats are
written with ``repr`` and ``wall_ms`` stays empty unless timing is asked
for, so reruns with one seed give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .aggregation import (
    Average,
    LinearCombo,
    Maximum,
    MeanAbsDev,
    Minimum,
    Percentile,
    ThresholdExceedance,
    aggregate,
    format_aggregator,
)
from .colgen import build_master, run_colgen, solve_master
from .distributional import DiscreteDistribution, dist, dist_aggregate, distribution_from_weights, lipschitz_ball
from .encodings import (
    encode_prob_agg,
    encode_sequence_agg,
    brute_force_binaries,
    prob_witness,
    sequence_witness,
    witness_check,
)
from .exact import (
    counts_from_schedule,
    evaluate_counts,
    evaluate_schedule,
    schedule_from_counts,
    solve_descriptive,
    solve_pe,
)
from .instance import alpha_filter, gen_random
from .relaxation import ProbVector, epsilon_schedule, round_schedule, solve_relaxation
from .unfairness import Gap

__all__ = ["CaseRow", "SuiteResult", "SUITES", "run_suite", "rows_to_csv", "CSV_COLUMNS"]

CSV_COLUMNS = ("case", "method", "T", "phi", "phi_hat", "L", "bound_ok", "wall_ms")

HALF_MIN_AVG = LinearCombo(((0.5, Minimum()), (0.5, Average())))
EQUIVALENCE_AGGS = (Average(), Minimum(), Maximum(), ThresholdExceedance(0.5), MeanAbsDev(), HALF_MIN_AVG)


@dataclass
class CaseRow:
    case: str
    method: str
    T: int | None
    phi: float | None
    phi_hat: float | None
    L: float | None
    bound_ok: bool
    wall_ms: float | None = None
    detail: str = ""


@dataclass
class SuiteResult:
    name: str
    rows: list

    @property
    def passed(self) -> bool:
        return all(r.bound_ok for r in self.rows)

    @property
    def failures(self) -> list:
        return [r for r in self.rows if not r.bound_ok]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows, timing: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_cell(r.case), _cell(r.method), _cell(r.T), _cell(r.phi), _cell(r.phi_hat),
                    _cell(r.L), _cell(r.bound_ok), _cell(r.wall_ms) if timing else ""])
    return buf.getvalue()


class _Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = round((time.perf_counter() - self.t0) * 1e3, 3)


def _random_filtered(rng, n_max, k_max, k_min=1, resolution=None):
    n = int(rng.integers(1, n_max + 1))
    k = int(rng.integers(k_min, k_max + 1))
    seed = int(rng.integers(0, 2 ** 31))
    # a tiny alpha keeps (almost) every decision
    return alpha_filter(gen_random(n, k, seed=seed, alpha=1e-3, resolution=resolution))


# -- suites -------------------------------------------------------------------------

def suite_equivalence(seed: int = 0, count: int = 100, **_) -> list:
    """Descriptive vs PE optimum; ``phi`` = PE, ``phi_hat`` = descriptive.

    A case also checks the enumeration counts and that converting either
    optimum to the other form keeps its objective.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for c in range(count):
        fi = _random_filtered(rng, 3, 4)
        T = int(rng.integers(1, 6))
        agg = EQUIVALENCE_AGGS[c % len(EQUIVALENCE_AGGS)]
        with _Clock() as clk:
            d = solve_descriptive(fi, agg, Gap(), T)
            p = solve_pe(fi, agg, Gap(), T)
            ok = abs(d.objective - p.objective) <= 1e-10
            ok &= d.enumerated == fi.k ** T and p.enumerated == math.comb(T + fi.k - 1, fi.k - 1)
            if fi.k >= 2 and T >= 2:
                ok &= p.enumerated < d.enumerated
            back = evaluate_schedule(fi, agg, Gap(), schedule_from_counts(p.count_vector).picks)[0]
            fwd = evaluate_counts(fi, agg, Gap(), counts_from_schedule(d.schedule, fi.k).counts)[0]
            ok &= abs(back - p.objective) <= 1e-10 and abs(fwd - d.objective) <= 1e-10
        rows.append(CaseRow(f"eq{c}", format_aggregator(agg), T, p.objective, d.objective, None, bool(ok), clk.ms,
                            f"n={fi.n} k={fi.k} enumerated={d.enumerated}/{p.enumerated}"))
    return rows


def suite_rounding(seed: int = 0, count: int = 50, **_) -> list:
    """Average with gap at ``eps`` in {0.5, 0.1, 0.02}; ``phi`` = rounded value.

    Also rounds adversarial vectors sitting just off the ``1/T`` grid, where
    ``phi`` holds the realised ``max |q/T - p|``.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for c in range(count):
        fi = _random_filtered(rng, 3, 6, k_min=2)
        r = solve_relaxation(fi, Average(), Gap())
        for eps in (0.5, 0.1, 0.02):
            with _Clock() as clk:
                e = epsilon_schedule(r, eps)
                T_expected = 1 if r.lipschitz == 0 else math.ceil(Fraction(r.lipschitz) / Fraction(eps))
                ok = e.T == T_expected and e.phi_T <= r.objective + eps + 1e-9
                _, bound = round_schedule(r.p, e.T)
                moved = max(abs(q / e.T - v) for q, v in zip(e.counts.counts, r.p.probs))
                ok &= moved <= bound
            rows.append(CaseRow(f"round{c}_eps{eps!r}", "relax+round", e.T, e.phi_T, r.objective,
                                r.lipschitz, bool(ok), clk.ms))
    for c in range(count):
        k = int(rng.integers(2, 6))
        T = int(rng.integers(1, 40))
        base = rng.multinomial(T, np.ones(k) / k)
        nudge = rng.choice([-1e-12, 1e-12, 0.0], size=k)
        p = np.maximum(base / T + nudge, 0.0)
        p = p / p.sum()
        with _Clock() as clk:
            cv, bound = round_schedule(ProbVector(tuple(p)), T)
            gap = max(abs(Fraction(q, T) - Fraction(v)) for q, v in zip(cv.counts, p))
            ok = sum(cv.counts) == T and gap <= Fraction(1, T)
        rows.append(CaseRow(f"edge{c}", "round", T, float(gap), None, None, bool(ok), clk.ms))
    return rows


LIPSCHITZ_CASES = ("min", "max", "pctl-inner", "pctl-mid", "pctl-boundary", "mad")


def _lipschitz_spec(name, d: DiscreteDistribution):
    if name == "min":
        return Minimum()
    if name == "max":
        return Maximum()
    if name == "mad":
        return MeanAbsDev()
    cum = np.cumsum(d.counts) / d.total
    if name == "pctl-boundary":
        return Percentile(float(Fraction(int(np.cumsum(d.counts)[0]), d.total)))
    if name == "pctl-mid":
        return Percentile((cum[0] + cum[1]) / 2 if d.m > 2 else cum[0] / 2)
    return Percentile(cum[0] / 3)


def suite_lipschitz(seed: int = 0, count: int = 3, samples: int = 10000, **_) -> list:
    """Sampled same-support perturbations inside each reported ball.

    ``phi`` is the largest excess ``|dtheta| - L dist`` observed and ``T``
    the number of samples drawn inside the ball (``samples`` unless the ball
    is empty).
    """
    rng = np.random.default_rng(seed)
    rows = []
    for name in LIPSCHITZ_CASES:
        for c in range(count):
            m = int(rng.integers(3, 6))
            support = np.sort(rng.choice(np.arange(-20, 21), size=m, replace=False)) / 4.0
            counts = rng.integers(1, 6, size=m)
            d = DiscreteDistribution.from_counts(tuple(support), tuple(int(q) for q in counts))
            spec = _lipschitz_spec(name, d)
            with _Clock() as clk:
                ball = lipschitz_ball(spec, d)
                base = dist_aggregate(spec, d)
                p = np.array(d.probs)
                worst, drawn, attempts = -math.inf, 0, 0
                # an empty ball (radius 0) admits no perturbation at all
                while ball.radius > 0 and drawn < samples and attempts < 20 * samples:
                    attempts += 1
                    if math.isinf(ball.radius):
                        q = rng.dirichlet(np.ones(m))
                    else:
                        e = rng.uniform(-1, 1, size=m)
                        e -= e.mean()
                        e *= ball.radius * rng.uniform(0, 1) / max(np.abs(e).max(), 1e-300)
                        q = p + e
                    if np.any(q <= 0) or abs(math.fsum(q) - 1.0) > 1e-12:
                        continue
                    other = DiscreteDistribution(d.support, tuple(q))
                    if not dist(d, other) < ball.radius:
                        continue
                    drawn += 1
                    excess = abs(dist_aggregate(spec, other) - base) - ball.constant * dist(d, other)
                    worst = max(worst, excess)
                ok = worst <= 1e-9
            rows.append(CaseRow(f"{name}{c}", format_aggregator(spec), drawn,
                                None if drawn == 0 else worst, base, ball.constant, bool(ok), clk.ms,
                                f"radius={ball.radius!r}"))
    return rows


SEQUENCE_SPECS = (Average(), Minimum(), Maximum(), Percentile(0.5), Percentile(0.3),
                  ThresholdExceedance(0.5), MeanAbsDev())
PROB_SPECS = (Average(), Minimum(), ThresholdExceedance(0.5), MeanAbsDev())


def suite_encodings(seed: int = 0, count: int = 50, bigm_scale: float | None = None, **_) -> list:
    """Exhaustive check of every encoding; ``phi`` = functional value and
    ``phi_hat`` = the single value found by enumeration.

    ``bigm_scale`` builds every system with ``M = scale * range`` instead of
    the default; below 1 this is the corrupted fixture and the failing
    constraint is named in the row detail.
    """
    rng = np.random.default_rng(seed)
    rows = []

    def bigm(values, spec):
        if bigm_scale is None:
            return None
        vals = list(values) + ([spec.h] if isinstance(spec, ThresholdExceedance) else [])
        span = max(vals) - min(vals)
        return max(bigm_scale * span, 1e-9)

    for c in range(count):
        T = int(rng.integers(1, 5))
        seq = (rng.integers(0, 9, size=T) / 8.0).tolist()
        for spec in SEQUENCE_SPECS:
            with _Clock() as clk:
                cs = encode_sequence_agg(spec, seq, bigM=bigm(seq, spec))
                check = witness_check(cs, sequence_witness(cs, spec, seq))
                found = brute_force_binaries(cs)
                value = aggregate(spec, seq)
                ok = bool(check) and len(found) == 1 and abs(found[0] - value) <= 1e-9
            rows.append(CaseRow(f"seq{c}", "seq:" + format_aggregator(spec), T, value,
                                found[0] if len(found) == 1 else None, None, ok, clk.ms,
                                "" if check else f"violated {check.label}"))
    for c in range(count):
        k = int(rng.integers(1, 5))
        u = (rng.integers(0, 9, size=k) / 8.0).tolist()
        w = rng.random(k)
        w[rng.random(k) < 0.3] = 0.0
        if w.sum() == 0:
            w[0] = 1.0
        p = w / w.sum()
        p = np.where((p > 0) & (p < 1e-3), 1e-3, p)
        p = p / p.sum()
        for spec in PROB_SPECS:
            with _Clock() as clk:
                cs = encode_prob_agg(spec, u, bigM=bigm(u, spec))
                check = witness_check(cs, prob_witness(cs, spec, u, p))
                found = brute_force_binaries(cs, {f"p{j}": float(p[j]) for j in range(k)})
                value = dist_aggregate(spec, distribution_from_weights(u, p))
                ok = bool(check) and len(found) == 1 and abs(found[0] - value) <= 1e-9
            rows.append(CaseRow(f"prob{c}", "prob:" + format_aggregator(spec), k, value,
                                found[0] if len(found) == 1 else None, None, ok, clk.ms,
                                "" if check else f"violated {check.label}"))
    return rows


def suite_colgen(seed: int = 0, count: int = 50, **_) -> list:
    """Column generation vs the all-columns master; ``T`` = iterations."""
    rng = np.random.default_rng(seed)
    rows = []
    for c in range(count):
        fi = _random_filtered(rng, 3, 6)
        with _Clock() as clk:
            res = run_colgen(fi)
            full = solve_master(build_master(fi)).value
            viol = res.trace[-1][3]
            values = [t[2] for t in res.trace]
            ok = (abs(res.value - full) <= 1e-7 and viol <= 1e-7 and res.iterations <= fi.k + 1
                  and all(b <= a + 1e-9 for a, b in zip(values, values[1:])))
        rows.append(CaseRow(f"cg{c}", "colgen", res.iterations, res.value, full, None, bool(ok), clk.ms,
                            f"k={fi.k} violation={viol!r}"))
    return rows


SUITES = {
    "equivalence": suite_equivalence,
    "rounding": suite_rounding,
    "lipschitz": suite_lipschitz,
    "encodings": suite_encodings,
    "colgen": suite_colgen,
}


def run_suite(name: str, seed: int = 0, count: int | None = None, **options) -> SuiteResult:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    kwargs = dict(options)
    if count is not None:
        kwargs["count"] = count
    return SuiteResult(name, SUITES[name](seed=seed, **kwargs))
