"""Mixed-integer linear encodings of the aggregation functions.

Two families are built here:

* sequence encodings, where the utilities ``u(1..T)`` of one stakeholder
  are constants and binaries select the minimiser, the sorted order, the
  threshold crossings or the sign of each deviation;
* probability encodings, where the decision probabilities ``p_j`` are
  variables and the utilities ``u^j`` of the candidate decisions are
  constants.

Each system exposes the variable ``y`` that should equal the aggregated
value.  :func:`witness_check` tests a concrete assignment and
:func:`brute_force_binaries` enumerates every binary pattern, solving the
remaining linear program for the attainable range of ``y``; at desk scale
this is an exact oracle for the encoding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .aggregation import (
    Average,
    Maximum,
    MeanAbsDev,
    Minimum,
    Percentile,
    ThresholdExceedance,
    exact_mean,
    percentile_positions,
)
from .lp import LpProblem, solve_lp, write_lp

__all__ = [
    "Constraint",
    "ConstraintSystem",
    "Witness",
    "CheckResult",
    "EncodingError",
    "encode_sequence_agg",
    "encode_prob_agg",
    "sequence_witness",
    "prob_witness",
    "witness_check",
    "brute_force_binaries",
    "default_bigm",
]

DEFAULT_EPS = 1e-6
CHECK_TOL = 1e-9
MAX_BINARIES = 20


class EncodingError(ValueError):
    pass


@dataclass
class Constraint:
    label: str
    coeffs: np.ndarray
    sense: str
    rhs: float
    bilinear: tuple = ()  # (coef, var_a, var_b) products


@dataclass
class ConstraintSystem:
    """Variables are ordered continuous first, then binary."""

    var_names: tuple
    num_continuous: int
    num_binary: int
    constraints: list
    lower: np.ndarray
    upper: np.ndarray
    bigM: float
    eps: float
    y_index: int
    objective: np.ndarray | None = None

    def __post_init__(self):
        n = self.num_vars
        if len(self.var_names) != n:
            raise EncodingError("var_names must cover every variable")
        if not self.bigM > 0 or not self.eps > 0:
            raise EncodingError("bigM and eps must be positive")
        for con in self.constraints:
            if con.coeffs.shape != (n,):
                raise EncodingError(f"constraint {con.label} has the wrong width")

    @property
    def num_vars(self) -> int:
        return self.num_continuous + self.num_binary

    @property
    def nonlinear(self) -> bool:
        return any(con.bilinear for con in self.constraints)

    def index(self, name: str) -> int:
        return self.var_names.index(name)

    def to_lp_text(self, comment: str | None = None) -> str:
        c = self.objective if self.objective is not None else np.zeros(self.num_vars)
        rows = [(con.label, con.coeffs, con.sense, con.rhs) for con in self.constraints]
        bil = {con.label: [(w, self.var_names[a], self.var_names[b]) for w, a, b in con.bilinear]
               for con in self.constraints if con.bilinear}
        binaries = range(self.num_continuous, self.num_vars)
        return write_lp(self.var_names, c, rows, self.lower, self.upper,
                        binaries=binaries, comment=comment, bilinear=bil)


@dataclass
class Witness:
    continuous_values: np.ndarray
    binary_values: np.ndarray

    def __post_init__(self):
        self.continuous_values = np.asarray(self.continuous_values, dtype=float)
        self.binary_values = np.asarray(self.binary_values, dtype=float)


@dataclass
class CheckResult:
    ok: bool
    label: str | None = None
    violation: float = 0.0
    reason: str = ""

    def __bool__(self):
        return self.ok


class _Builder:
    def __init__(self):
        self.cont, self.bins = [], []
        self.bounds = {}
        self.rows = []

    def cont_var(self, name, lo=-math.inf, hi=math.inf):
        self.cont.append(name)
        self.bounds[name] = (lo, hi)
        return name

    def bin_var(self, name):
        self.bins.append(name)
        return name

    def row(self, label, terms: dict, sense, rhs, bilinear=()):
        self.rows.append((label, terms, sense, float(rhs), tuple(bilinear)))

    def build(self, bigM, eps, y="y") -> ConstraintSystem:
        names = tuple(self.cont + self.bins)
        idx = {nm: j for j, nm in enumerate(names)}
        cons = []
        for label, terms, sense, rhs, bil in self.rows:
            coeffs = np.zeros(len(names))
            for nm, v in terms.items():
                coeffs[idx[nm]] += v
            cons.append(Constraint(label, coeffs, sense, rhs,
                                   tuple((w, idx[a], idx[b]) for w, a, b in bil)))
        lower = np.array([self.bounds[nm][0] for nm in self.cont] + [0.0] * len(self.bins))
        upper = np.array([self.bounds[nm][1] for nm in self.cont] + [1.0] * len(self.bins))
        return ConstraintSystem(names, len(self.cont), len(self.bins), cons,
                                lower, upper, float(bigM), float(eps), idx[y])


def _range(values) -> float:
    return float(max(values) - min(values))


def default_bigm(spec, constants: Sequence[float]) -> float:
    """Smallest safe big-M: the range of the constants plus one.

    Absolute deviations can reach twice the range, so that family doubles it.
    """
    vals = [float(v) for v in constants]
    if isinstance(spec, ThresholdExceedance):
        vals.append(spec.h)
    span = _range(vals)
    if isinstance(spec, MeanAbsDev):
        return 2 * span + 1
    return span + 1


def encode_sequence_agg(spec, seq, bigM: float | None = None, eps: float = DEFAULT_EPS) -> ConstraintSystem:
    """Encode ``y = aggregate(spec, seq)`` with ``seq`` as constants."""
    u = [float(v) for v in seq]
    T = len(u)
    if T == 0:
        raise EncodingError("empty sequence")
    M = default_bigm(spec, u) if bigM is None else float(bigM)
    B = _Builder()
    B.cont_var("y")
    if isinstance(spec, Average):
        B.row("avg", {"y": 1.0}, "=", exact_mean(u))
    elif isinstance(spec, (Minimum, Maximum)):
        # min: u_t - M b_t <= y <= u_t ; max: u_t <= y <= u_t + M b_t
        for t in range(T):
            B.bin_var(f"b{t}")
        for t in range(T):
            if isinstance(spec, Minimum):
                B.row(f"lo{t}", {"y": 1.0, f"b{t}": M}, ">=", u[t])
                B.row(f"hi{t}", {"y": 1.0}, "<=", u[t])
            else:
                B.row(f"lo{t}", {"y": 1.0}, ">=", u[t])
                B.row(f"hi{t}", {"y": 1.0, f"b{t}": -M}, "<=", u[t])
        B.row("count", {f"b{t}": 1.0 for t in range(T)}, "=", T - 1)
    elif isinstance(spec, Percentile):
        for t in range(T):
            B.cont_var(f"w{t}")
        for t in range(T):
            for s in range(T):
                B.bin_var(f"b{t}_{s}")
        for t in range(T - 1):
            B.row(f"sorted{t}", {f"w{t}": 1.0, f"w{t + 1}": -1.0}, "<=", 0.0)
        for t in range(T):
            for s in range(T):
                B.row(f"upper{t}_{s}", {f"w{t}": 1.0, f"b{t}_{s}": M}, "<=", u[s] + M)
                B.row(f"lower{t}_{s}", {f"w{t}": 1.0, f"b{t}_{s}": -M}, ">=", u[s] - M)
        for s in range(T):
            B.row(f"col{s}", {f"b{t}_{s}": 1.0 for t in range(T)}, "=", 1.0)
        for t in range(T):
            B.row(f"row{t}", {f"b{t}_{s}": 1.0 for s in range(T)}, "=", 1.0)
        a, b = percentile_positions(spec.rho, T)
        if a == b:
            B.row("pick", {"y": 1.0, f"w{a - 1}": -1.0}, "=", 0.0)
        else:
            B.row("pick", {"y": 2.0, f"w{a - 1}": -1.0, f"w{b - 1}": -1.0}, "=", 0.0)
    elif isinstance(spec, ThresholdExceedance):
        h = spec.h
        for t in range(T):
            B.bin_var(f"b{t}")
        for t in range(T):
            # b_t = 0 forces u_t < h (by eps), b_t = 1 forces u_t >= h
            B.row(f"below{t}", {f"b{t}": -M}, "<=", h - eps - u[t])
            B.row(f"above{t}", {f"b{t}": -M}, ">=", h - M - u[t])
        terms = {"y": 1.0}
        terms.update({f"b{t}": -1.0 / T for t in range(T)})
        B.row("frac", terms, "=", 0.0)
    elif isinstance(spec, MeanAbsDev):
        ubar = exact_mean(u)
        B.cont_var("ubar")
        for t in range(T):
            B.cont_var(f"v{t}")
        for t in range(T):
            B.bin_var(f"b{t}")
        B.row("mean", {"ubar": 1.0}, "=", ubar)
        for t in range(T):
            B.row(f"ge_pos{t}", {f"v{t}": 1.0, "ubar": 1.0}, ">=", u[t])
            B.row(f"ge_neg{t}", {f"v{t}": 1.0, "ubar": -1.0}, ">=", -u[t])
            B.row(f"le_pos{t}", {f"v{t}": 1.0, "ubar": 1.0, f"b{t}": -M}, "<=", u[t])
            B.row(f"le_neg{t}", {f"v{t}": 1.0, "ubar": -1.0, f"b{t}": M}, "<=", M - u[t])
        terms = {"y": 1.0}
        terms.update({f"v{t}": -1.0 / T for t in range(T)})
        B.row("avg_dev", terms, "=", 0.0)
    else:
        raise EncodingError(f"no sequence encoding for {spec!r}; compose combinators at evaluation level")
    return B.build(M, eps)


def encode_prob_agg(spec, utilities, bigM: float | None = None, eps: float = DEFAULT_EPS) -> ConstraintSystem:
    """Encode ``y`` as the aggregate of the distribution ``p`` over ``utilities``.

    Minimum uses indicator pairs ``r_j`` (``p_j >= eps``) and ``b_j``; the
    utilities are shifted to be non-negative inside the system and the
    shift is added back through ``y = ys + min(u)``.  Threshold exceedance is
    linear.  Mean absolute deviation contains the products ``p_j s_j``,
    stored as bilinear terms.
    """
    u = [float(v) for v in utilities]
    k = len(u)
    if k == 0:
        raise EncodingError("need at least one utility")
    if not all(math.isfinite(v) for v in u):
        raise EncodingError("utilities must be finite")
    M = default_bigm(spec, u) if bigM is None else float(bigM)
    B = _Builder()
    B.cont_var("y")
    for j in range(k):
        B.cont_var(f"p{j}", 0.0, math.inf)
    B.row("simplex", {f"p{j}": 1.0 for j in range(k)}, "=", 1.0)
    if isinstance(spec, Average):
        terms = {"y": 1.0}
        terms.update({f"p{j}": -u[j] for j in range(k)})
        B.row("avg", terms, "=", 0.0)
    elif isinstance(spec, Minimum):
        base = min(u)
        us = [v - base for v in u]
        B.cont_var("ys")
        for j in range(k):
            B.bin_var(f"r{j}")
        for j in range(k):
            B.bin_var(f"b{j}")
        for j in range(k):
            B.row(f"eta{j}", {f"r{j}": 1.0, f"p{j}": -1.0}, ">=", 0.0)
            B.row(f"theta{j}", {f"p{j}": 1.0, f"r{j}": -eps}, ">=", 0.0)
        terms = {f"b{j}": 1.0 for j in range(k)}
        terms.update({f"r{j}": -1.0 for j in range(k)})
        B.row("count", terms, "=", -1.0)
        for j in range(k):
            B.row(f"gamma{j}", {f"r{j}": us[j], "ys": -1.0, f"b{j}": -M}, "<=", 0.0)
            B.row(f"delta{j}", {"ys": 1.0, f"r{j}": M - us[j]}, "<=", M)
        B.row("shift", {"y": 1.0, "ys": -1.0}, "=", base)
    elif isinstance(spec, ThresholdExceedance):
        terms = {"y": 1.0}
        for j in range(k):
            if u[j] >= spec.h:
                terms[f"p{j}"] = -1.0
        B.row("exceed", terms, "=", 0.0)
    elif isinstance(spec, MeanAbsDev):
        B.cont_var("m")
        for j in range(k):
            B.cont_var(f"s{j}")
        for j in range(k):
            B.bin_var(f"b{j}")
        terms = {"m": 1.0}
        terms.update({f"p{j}": -u[j] for j in range(k)})
        B.row("mean", terms, "=", 0.0)
        for j in range(k):
            B.row(f"ge_pos{j}", {f"s{j}": 1.0, "m": 1.0}, ">=", u[j])
            B.row(f"ge_neg{j}", {f"s{j}": 1.0, "m": -1.0}, ">=", -u[j])
            B.row(f"le_pos{j}", {f"s{j}": 1.0, "m": 1.0, f"b{j}": -M}, "<=", u[j])
            B.row(f"le_neg{j}", {f"s{j}": 1.0, "m": -1.0, f"b{j}": M}, "<=", M - u[j])
        B.row("weighted", {"y": 1.0}, "=", 0.0,
              bilinear=[(-1.0, f"p{j}", f"s{j}") for j in range(k)])
    else:
        raise EncodingError(f"no probability encoding for {spec!r}")
    return B.build(M, eps)


# -- witnesses -------------------------------------------------------------------

def _assemble(cs: ConstraintSystem, values: dict) -> Witness:
    full = np.zeros(cs.num_vars)
    for nm, v in values.items():
        full[cs.index(nm)] = v
    return Witness(full[: cs.num_continuous], full[cs.num_continuous:])


def sequence_witness(cs: ConstraintSystem, spec, seq) -> Witness:
    """Assignment built from the functional value (independent of any solver)."""
    from .aggregation import aggregate

    u = [float(v) for v in seq]
    T = len(u)
    vals = {"y": aggregate(spec, u)}
    if isinstance(spec, (Minimum, Maximum)):
        pick = u.index(min(u) if isinstance(spec, Minimum) else max(u))
        vals.update({f"b{t}": float(t != pick) for t in range(T)})
    elif isinstance(spec, Percentile):
        order = sorted(range(T), key=lambda s: u[s])
        for t, s in enumerate(order):
            vals[f"w{t}"] = u[s]
            vals[f"b{t}_{s}"] = 1.0
    elif isinstance(spec, ThresholdExceedance):
        vals.update({f"b{t}": float(u[t] >= spec.h) for t in range(T)})
    elif isinstance(spec, MeanAbsDev):
        ubar = exact_mean(u)
        vals["ubar"] = ubar
        for t in range(T):
            vals[f"v{t}"] = abs(u[t] - ubar)
            vals[f"b{t}"] = float(u[t] - ubar < 0)
    return _assemble(cs, vals)


def prob_witness(cs: ConstraintSystem, spec, utilities, p) -> Witness:
    u = [float(v) for v in utilities]
    p = [float(v) for v in p]
    k = len(u)
    vals = {f"p{j}": p[j] for j in range(k)}
    support = [j for j in range(k) if p[j] > 0]
    if isinstance(spec, Average):
        vals["y"] = math.fsum(pj * uj for pj, uj in zip(p, u))
    elif isinstance(spec, Minimum):
        base = min(u)
        pick = min(support, key=lambda j: u[j])
        vals["y"] = u[pick]
        vals["ys"] = u[pick] - base
        for j in range(k):
            vals[f"r{j}"] = float(j in support)
            vals[f"b{j}"] = float(j in support and j != pick)
    elif isinstance(spec, ThresholdExceedance):
        vals["y"] = math.fsum(p[j] for j in range(k) if u[j] >= spec.h)
    elif isinstance(spec, MeanAbsDev):
        m = math.fsum(pj * uj for pj, uj in zip(p, u))
        vals["m"] = m
        for j in range(k):
            vals[f"s{j}"] = abs(u[j] - m)
            vals[f"b{j}"] = float(u[j] - m < 0)
        vals["y"] = math.fsum(p[j] * abs(u[j] - m) for j in range(k))
    return _assemble(cs, vals)


def witness_check(cs: ConstraintSystem, w: Witness, tol: float = CHECK_TOL) -> CheckResult:
    """Evaluate every constraint at ``w``; report the first violation."""
    if w.continuous_values.shape != (cs.num_continuous,) or w.binary_values.shape != (cs.num_binary,):
        raise EncodingError("witness dimensions do not match the system")
    bad = [j for j, b in enumerate(w.binary_values) if b not in (0.0, 1.0)]
    if bad:
        name = cs.var_names[cs.num_continuous + bad[0]]
        return CheckResult(False, name, reason=f"binary {name} = {w.binary_values[bad[0]]} is not 0/1")
    x = np.concatenate([w.continuous_values, w.binary_values])
    for j in range(cs.num_continuous):
        if x[j] < cs.lower[j] - tol or x[j] > cs.upper[j] + tol:
            return CheckResult(False, cs.var_names[j], reason="bound violated")
    for con in cs.constraints:
        terms = con.coeffs * x
        lhs = math.fsum(terms) + math.fsum(wt * x[a] * x[b] for wt, a, b in con.bilinear)
        scale = max(1.0, abs(con.rhs), float(np.abs(terms).max(initial=0.0)))
        gap = lhs - con.rhs
        if con.sense == "<=":
            viol = gap
        elif con.sense == ">=":
            viol = -gap
        else:
            viol = abs(gap)
        if viol > tol * scale:
            return CheckResult(False, con.label, viol, reason=f"{con.label} violated by {viol:.3g}")
    return CheckResult(True)


# -- exhaustive oracle ---------------------------------------------------------------

def _merge(values, tol):
    out = []
    for v in sorted(values):
        if not out or abs(v - out[-1]) > tol * max(1.0, abs(v)):
            out.append(v)
    return out


def brute_force_binaries(cs: ConstraintSystem, fixed: dict | None = None,
                         tol: float = CHECK_TOL, max_binary: int = MAX_BINARIES) -> list:
    """Attainable values of ``y`` over all binary patterns.

    ``fixed`` maps continuous variable names to a value or a ``(lo, hi)``
    pair.  For every pattern the remaining linear program is solved twice,
    minimising and maximising ``y``; both extremes are collected, so a
    correct encoding yields a single value.  Bilinear terms need one factor
    fixed by ``fixed``.
    """
    if cs.num_binary > max_binary:
        raise EncodingError(f"{cs.num_binary} binaries exceed the brute-force limit {max_binary}")
    nc, nb = cs.num_continuous, cs.num_binary
    lower = cs.lower[:nc].copy()
    upper = cs.upper[:nc].copy()
    for name, val in (fixed or {}).items():
        j = cs.index(name)
        if j >= nc:
            raise EncodingError(f"{name} is binary; fix continuous variables only")
        lo, hi = (val, val) if np.isscalar(val) else val
        lower[j], upper[j] = max(lower[j], lo), min(upper[j], hi)

    rows_A, rows_b, senses = [], [], []
    for con in cs.constraints:
        coeffs = con.coeffs.copy()
        for wt, a, b in con.bilinear:
            if a < nc and lower[a] == upper[a]:
                coeffs[b] += wt * lower[a]
            elif b < nc and lower[b] == upper[b]:
                coeffs[a] += wt * lower[b]
            else:
                raise EncodingError(f"bilinear term in {con.label} has no fixed factor")
        rows_A.append(coeffs)
        rows_b.append(con.rhs)
        senses.append(con.sense)
    A = np.array(rows_A).reshape(-1, nc + nb)
    rhs = np.array(rows_b)
    Ac, Ab = A[:, :nc], A[:, nc:]

    patterns = ((np.arange(2 ** nb)[:, None] >> np.arange(nb)[::-1]) & 1).astype(float) if nb else np.zeros((1, 0))
    # rows touching only binaries are checked for all patterns at once
    pure = np.flatnonzero(np.all(Ac == 0, axis=1))
    if pure.size:
        lhs = patterns @ Ab[pure].T
        ok = np.ones(len(patterns), dtype=bool)
        for col, i in enumerate(pure):
            s, r = senses[i], rhs[i]
            if s == "<=":
                ok &= lhs[:, col] <= r + tol
            elif s == ">=":
                ok &= lhs[:, col] >= r - tol
            else:
                ok &= np.abs(lhs[:, col] - r) <= tol
        patterns = patterns[ok]
    mixed = np.setdiff1d(np.arange(len(senses)), pure)
    y = cs.y_index
    found = []
    for pat in patterns:
        b_eff = rhs[mixed] - Ab[mixed] @ pat
        cobj = np.zeros(nc)
        cobj[y] = 1.0
        prob = LpProblem(cobj, Ac[mixed], tuple(senses[i] for i in mixed), b_eff, lower, upper)
        lo = solve_lp(prob)
        if lo.status == "infeasible":
            continue
        prob.c = -cobj
        hi = solve_lp(prob)
        found.append(lo.x[y] if lo.optimal else -math.inf)
        found.append(hi.x[y] if hi.optimal else math.inf)
    return _merge(found, tol)
