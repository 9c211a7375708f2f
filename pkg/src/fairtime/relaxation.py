"""Probabilistic relaxation and the constructive finite-horizon results.

Dropping the integrality of ``T p_j`` leaves an optimisation over the
probability simplex whose value ``phi_hat`` lower-bounds every finite
horizon.  Three solution strategies are used:

``lp``
    average-type aggregators: every aggregated utility is linear in ``p``
    and the problem is a single linear program;
``support_enum``
    combinations of average, minimum, maximum and threshold exceedance:
    once the support of ``p`` is fixed every aggregate is affine in ``p``,
    so one LP per support (with ``p_j >= eps`` on it) resolves the problem
    exactly;
``grid``
    combinations involving mean absolute deviation, or quadratic
    unfairness, for ``k <= 4``: a simplex grid with local refinement,
    certified to within ``L * step``.

A rational optimum is realised exactly by :func:`lcm_schedule`; any optimum
is approximated to within ``eps`` by :func:`epsilon_schedule`, which floors
``T p`` for ``T = ceil(L / eps)``.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .aggregation import (
    Average,
    LinearCombo,
    MaxOf,
    Maximum,
    MeanAbsDev,
    MinOf,
    Minimum,
    Percentile,
    ThresholdExceedance,
)
from .distributional import dist_aggregate, distribution_from_weights, lipschitz_ball
from .exact import CountVector, Schedule, evaluate_counts, schedule_from_counts
from .lp import LpProblem, solve_lp
from .unfairness import Gap, MaxDeviationFromMean, Quadratic, unfairness, unfairness_lipschitz, unfairness_rows

__all__ = [
    "ProbVector",
    "RelaxationResult",
    "RelaxationError",
    "RoundingGateError",
    "PerfectFairness",
    "EpsilonSchedule",
    "solve_relaxation",
    "rationalize",
    "check_perfect_fairness",
    "lcm_schedule",
    "round_schedule",
    "epsilon_schedule",
    "composite_lipschitz",
]

SUM_TOL = 1e-10
SUPPORT_EPS = 1e-6
MAX_SUPPORT_K = 12
MAX_GRID_K = 4
GRID_N = 200
CLEAN_TOL = 1e-12
LCM_LIMIT = 2 ** 62

ACHIEVABLE = "achievable-with-finite-T"
IRRATIONAL = "zero-but-irrational"
NOT_PERFECT = "not-perfect"


class RelaxationError(ValueError):
    pass


class RoundingGateError(RelaxationError):
    """The horizon is too short for the local Lipschitz balls."""

    def __init__(self, message, required_T):
        super().__init__(message)
        self.required_T = required_T


@dataclass(frozen=True)
class ProbVector:
    probs: tuple
    rational: tuple | None = None  # of Fraction

    def __post_init__(self):
        probs = tuple(float(v) for v in self.probs)
        if not probs or any(not v >= 0 for v in probs):
            raise RelaxationError("probabilities must be non-negative")
        if abs(math.fsum(probs) - 1.0) > SUM_TOL:
            raise RelaxationError(f"probabilities sum to {math.fsum(probs)!r}")
        if self.rational is not None:
            rat = tuple(Fraction(v) for v in self.rational)
            if len(rat) != len(probs) or sum(rat) != 1 or any(v < 0 for v in rat):
                raise RelaxationError("rational form must be a distribution")
            if any(abs(float(a) - b) > 1e-12 for a, b in zip(rat, probs)):
                raise RelaxationError("rational form does not match the floats")
            object.__setattr__(self, "rational", rat)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_fractions(cls, fracs) -> "ProbVector":
        fracs = [Fraction(v) for v in fracs]
        return cls(tuple(float(v) for v in fracs), tuple(fracs))

    @property
    def k(self) -> int:
        return len(self.probs)

    @property
    def support(self) -> tuple:
        return tuple(j for j, v in enumerate(self.probs) if v > 0)


@dataclass(frozen=True)
class RelaxationResult:
    p: ProbVector
    objective: float
    method: str
    lipschitz: float
    certificate: float | None = None
    aggregated: tuple = ()
    instance: object = field(default=None, repr=False, compare=False)
    agg: object = field(default=None, repr=False, compare=False)
    unf: object = field(default=None, repr=False, compare=False)

    @property
    def lower_bound(self) -> float:
        return self.objective - (self.certificate or 0.0)


# -- helpers on aggregator trees --------------------------------------------------

def _linear_tree(spec, allowed) -> bool:
    if isinstance(spec, LinearCombo):
        return all(_linear_tree(s, allowed) for _, s in spec.terms)
    return isinstance(spec, allowed)


def _affine(spec, U, support):
    """``y = const + coef @ p`` valid for every ``p`` supported on ``support``."""
    n, k = U.shape
    if isinstance(spec, Average):
        return np.zeros(n), U.copy()
    if isinstance(spec, Minimum):
        return U[:, support].min(axis=1), np.zeros((n, k))
    if isinstance(spec, Maximum):
        return U[:, support].max(axis=1), np.zeros((n, k))
    if isinstance(spec, ThresholdExceedance):
        return np.zeros(n), (U >= spec.h).astype(float)
    if isinstance(spec, LinearCombo):
        const, coef = np.zeros(n), np.zeros((n, k))
        for w, s in spec.terms:
            c0, a0 = _affine(s, U, support)
            const, coef = const + w * c0, coef + w * a0
        return const, coef
    raise RelaxationError(f"{spec!r} is not affine on a fixed support")


def _abs_bound(spec, values) -> float:
    """Bound on ``|aggregate|`` over distributions on ``values``."""
    vmax = float(np.abs(values).max())
    if isinstance(spec, (Average, Minimum, Maximum, Percentile)):
        return vmax
    if isinstance(spec, ThresholdExceedance):
        return 1.0
    if isinstance(spec, MeanAbsDev):
        return float(np.max(values) - np.min(values))
    if isinstance(spec, LinearCombo):
        return math.fsum(abs(w) * _abs_bound(s, values) for w, s in spec.terms)
    if isinstance(spec, (MaxOf, MinOf)):
        return max(_abs_bound(s, values) for s in spec.parts)
    raise RelaxationError(f"unknown aggregator {spec!r}")


def _phi_lipschitz(unf, agg, U) -> float:
    n = U.shape[0]
    if isinstance(unf, Quadratic):
        box = max(_abs_bound(agg, U[i]) for i in range(n))
        return unfairness_lipschitz(unf, n, box_radius=box)
    return unfairness_lipschitz(unf, n)


def _stakeholder_terms(U, agg, probs):
    """Per-stakeholder (Lipschitz constant, ball radius, multiplicity)."""
    support = [j for j, v in enumerate(probs) if v > 0]
    out = []
    for row in U:
        d = distribution_from_weights(row, probs)
        ball = lipschitz_ball(agg, d)
        groups = {}
        for j in support:
            groups[row[j]] = groups.get(row[j], 0) + 1
        out.append((ball.constant, ball.radius, max(groups.values())))
    return out


def composite_lipschitz(fi, agg, unf, probs) -> float:
    """``L_phi * max_i (L_i * mult_i)`` around the distribution ``probs``.

    ``mult_i`` counts decisions sharing one utility value for stakeholder
    ``i``: moving every ``p_j`` by ``1/T`` moves the merged masses by up to
    ``mult_i / T``.
    """
    U = np.asarray(fi.utilities)
    terms = _stakeholder_terms(U, agg, probs)
    return _phi_lipschitz(unf, agg, U) * max(c * m for c, _, m in terms)


# -- the three strategies --------------------------------------------------------

def _affine_lp(const, coef, unf, cols, lower):
    """Minimise Gap or MaxDev of ``const + coef[:, cols] @ p`` over the simplex."""
    n = const.size
    m = len(cols)
    A = coef[:, cols]
    rows, senses, rhs = [], [], []
    if isinstance(unf, Gap):
        # variables: p (m), f, g ; minimise f - g
        c = np.concatenate([np.zeros(m), [1.0, -1.0]])
        for i in range(n):
            rows.append(np.concatenate([A[i], [-1.0, 0.0]])); senses.append("<="); rhs.append(-const[i])
            rows.append(np.concatenate([A[i], [0.0, -1.0]])); senses.append(">="); rhs.append(-const[i])
        extra_lo, extra_hi = [-math.inf, -math.inf], [math.inf, math.inf]
    elif isinstance(unf, MaxDeviationFromMean):
        # variables: p (m), t ; |y_i - mean(y)| <= t
        c = np.concatenate([np.zeros(m), [1.0]])
        Abar, cbar = A.mean(axis=0), const.mean()
        for i in range(n):
            dev, off = A[i] - Abar, const[i] - cbar
            rows.append(np.concatenate([dev, [-1.0]])); senses.append("<="); rhs.append(-off)
            rows.append(np.concatenate([dev, [1.0]])); senses.append(">="); rhs.append(-off)
        extra_lo, extra_hi = [0.0], [math.inf]
    else:
        raise RelaxationError(f"LP strategies need Gap or MaxDev, not {unf!r}")
    rows.append(np.concatenate([np.ones(m), np.zeros(len(extra_lo))])); senses.append("="); rhs.append(1.0)
    lo = np.concatenate([np.full(m, lower), extra_lo])
    hi = np.concatenate([np.ones(m), extra_hi])
    res = solve_lp(LpProblem(c, np.array(rows), tuple(senses), np.array(rhs), lo, hi))
    if not res.optimal:
        return None
    return res.objective, res.x[:m]


def _clean(p: np.ndarray) -> np.ndarray:
    p = np.where(p < CLEAN_TOL, 0.0, p)
    return p / math.fsum(p)


def _solve_lp_path(U, agg, unf):
    k = U.shape[1]
    const, coef = _affine(agg, U, list(range(k)))
    val, p = _affine_lp(const, coef, unf, list(range(k)), 0.0)
    return _clean(p)


def _solve_support_enum(U, agg, unf, eps):
    k = U.shape[1]
    best = None
    for size in range(1, k + 1):
        if size * eps > 1:
            break
        for support in itertools.combinations(range(k), size):
            support = list(support)
            const, coef = _affine(agg, U, support)
            out = _affine_lp(const, coef, unf, support, eps)
            if out is None:
                continue
            val, ps = out
            if best is None or val < best[0] - CLEAN_TOL:
                p = np.zeros(k)
                p[support] = ps
                best = (val, p)
    return best[1] / math.fsum(best[1])


@functools.lru_cache(maxsize=32)
def _grid_points(N, k):
    """All count vectors of length ``k`` summing to ``N`` (stars and bars)."""
    if k == 1:
        return np.array([[N]], dtype=np.int64)
    flat = itertools.chain.from_iterable(itertools.combinations(range(N + k - 1), k - 1))
    bars = np.fromiter(flat, dtype=np.int64).reshape(-1, k - 1)
    edges = np.hstack([np.full((bars.shape[0], 1), -1), bars, np.full((bars.shape[0], 1), N + k - 1)])
    out = np.diff(edges, axis=1) - 1
    out.setflags(write=False)
    return out


def _agg_matrix(spec, u, P):
    """Aggregate of one stakeholder (utilities ``u``) for each row of ``P``."""
    if isinstance(spec, Average):
        return P @ u
    if isinstance(spec, ThresholdExceedance):
        return P @ (u >= spec.h).astype(float)
    if isinstance(spec, MeanAbsDev):
        m = P @ u
        return (P * np.abs(u[None, :] - m[:, None])).sum(axis=1)
    if isinstance(spec, LinearCombo):
        out = np.zeros(P.shape[0])
        for w, s in spec.terms:
            out = out + w * _agg_matrix(s, u, P)
        return out
    raise RelaxationError(f"grid evaluation does not support {spec!r}")


def _grid_values(U, agg, unf, P):
    Y = np.stack([_agg_matrix(agg, U[i], P) for i in range(U.shape[0])], axis=1)
    return unfairness_rows(unf, Y)


def _best_of(U, agg, unf, P, best):
    for start in range(0, P.shape[0], 1 << 16):
        chunk = P[start:start + (1 << 16)]
        vals = _grid_values(U, agg, unf, chunk)
        r = int(np.argmin(vals))
        if best is None or vals[r] < best[0]:
            best = (float(vals[r]), chunk[r].copy())
    return best


def _solve_grid(U, agg, unf):
    k = U.shape[1]
    best = _best_of(U, agg, unf, _grid_points(GRID_N, k) / GRID_N, None)
    # small horizons are always candidates, so the grid never loses to them
    for T in range(1, 13):
        best = _best_of(U, agg, unf, _grid_points(T, k) / T, best)
    step = 1.0 / GRID_N
    for _ in range(2):
        fine = step / 10
        offs = np.arange(-10, 11) * fine
        local = np.array(list(itertools.product(offs, repeat=k - 1))) if k > 1 else np.zeros((1, 0))
        P = best[1][None, :k - 1] + local
        P = np.hstack([P, 1.0 - P.sum(axis=1, keepdims=True)])
        P = P[np.all(P >= 0, axis=1)]
        best = _best_of(U, agg, unf, P, best)
        step = fine
    return _clean(best[1])


def _global_lipschitz(U, agg, unf) -> float:
    k = U.shape[1]
    return _phi_lipschitz(unf, agg, U) * max(c * m for c, _, m in _stakeholder_terms(U, agg, [1.0 / k] * k))


def solve_relaxation(fi, agg, unf, eps: float = SUPPORT_EPS, method: str | None = None) -> RelaxationResult:
    """Minimise the unfairness of the aggregated utilities over the simplex."""
    U = np.asarray(fi.utilities, dtype=float)
    k = fi.k
    lp_ok = _linear_tree(agg, (Average,)) and isinstance(unf, (Gap, MaxDeviationFromMean))
    enum_ok = (_linear_tree(agg, (Average, Minimum, Maximum, ThresholdExceedance))
               and isinstance(unf, (Gap, MaxDeviationFromMean)))
    grid_ok = _linear_tree(agg, (Average, ThresholdExceedance, MeanAbsDev))
    if method is None:
        method = "lp" if lp_ok else "support_enum" if enum_ok else "grid" if grid_ok else None
        if method is None:
            raise RelaxationError(
                f"no relaxation strategy for {agg!r} with {unf!r}; supported: linear combinations of "
                "avg/min/max/thresh with gap or maxdev, or of avg/thresh/mad (k <= 4) with any unfairness")
    certificate = None
    if method == "lp":
        if not lp_ok:
            raise RelaxationError("the LP strategy needs an average-type aggregator with gap or maxdev")
        p = _solve_lp_path(U, agg, unf)
    elif method == "support_enum":
        if not enum_ok:
            raise RelaxationError("support enumeration needs avg/min/max/thresh combinations with gap or maxdev")
        if k > MAX_SUPPORT_K:
            raise RelaxationError(f"support enumeration is limited to k <= {MAX_SUPPORT_K}, got {k}")
        p = _solve_support_enum(U, agg, unf, eps)
    elif method == "grid":
        if not grid_ok:
            raise RelaxationError("the grid strategy needs avg/thresh/mad combinations")
        if k > MAX_GRID_K:
            raise RelaxationError(f"the grid strategy is limited to k <= {MAX_GRID_K}, got {k}")
        p = _solve_grid(U, agg, unf)
        certificate = _global_lipschitz(U, agg, unf) / GRID_N
    else:
        raise RelaxationError(f"unknown method {method!r}")
    pv = ProbVector(tuple(p))
    y = tuple(dist_aggregate(agg, distribution_from_weights(row, pv.probs)) for row in U)
    L = composite_lipschitz(fi, agg, unf, pv.probs)
    return RelaxationResult(pv, unfairness(unf, y), method, L, certificate, y, fi, agg, unf)


# -- rational results -------------------------------------------------------------

def rationalize(p, max_denominator: int = 10 ** 6, tol: float = 1e-9) -> ProbVector | None:
    """Nearest fractions with bounded denominators, or ``None``.

    Each entry is approximated by continued fractions; the largest entry
    then absorbs the rounding so the fractions sum to one exactly.  The
    result is rejected when any entry moves by more than ``tol``.
    """
    probs = p.probs if isinstance(p, ProbVector) else tuple(float(v) for v in p)
    fracs = [Fraction(v).limit_denominator(max_denominator) for v in probs]
    big = max(range(len(fracs)), key=lambda j: probs[j])
    fracs[big] = 1 - (sum(fracs) - fracs[big])
    if fracs[big] < 0 or any(abs(float(f) - v) > tol for f, v in zip(fracs, probs)):
        return None
    return ProbVector.from_fractions(fracs)


def lcm_schedule(p: ProbVector) -> tuple[Schedule, int]:
    if p.rational is None:
        raise RelaxationError("lcm_schedule needs a rational distribution")
    T = 1
    for f in p.rational:
        T = math.lcm(T, f.denominator)
        if T > LCM_LIMIT:
            raise RelaxationError("LCM of the denominators exceeds 2^62")
    counts = [int(f * T) for f in p.rational]
    return schedule_from_counts(CountVector(T, tuple(counts))), T


@dataclass(frozen=True)
class PerfectFairness:
    verdict: str
    T: int | None = None
    p: ProbVector | None = None


def check_perfect_fairness(r: RelaxationResult, tol: float = 1e-9,
                           max_denominator: int = 10 ** 6, rational_tol: float = 1e-13) -> PerfectFairness:
    """Classify a relaxation result as perfectly fair at a finite horizon.

    ``rational_tol`` bounds how far the floats may sit from the fractions
    that are taken to be the exact optimum.
    """
    if r.objective > tol:
        return PerfectFairness(NOT_PERFECT)
    q = rationalize(r.p, max_denominator, rational_tol)
    if q is None:
        return PerfectFairness(IRRATIONAL)
    sched, T = lcm_schedule(q)
    if r.instance is not None:
        cv = CountVector(T, tuple(int(f * T) for f in q.rational))
        if evaluate_counts(r.instance, r.agg, r.unf, cv.counts)[0] > tol:
            return PerfectFairness(IRRATIONAL, p=q)
    return PerfectFairness(ACHIEVABLE, T, q)


# -- rounding ---------------------------------------------------------------------

def round_schedule(p, T: int, mode: str = "lowest") -> tuple[CountVector, float]:
    """Floor ``T p`` and hand out the deficit one unit at a time.

    Units go to support indices in increasing order (``mode="lowest"``) or
    by largest fractional part (``mode="largest_remainder"``).  Returns the
    counts and the bound ``1/T`` on ``max_j |q_j/T - p_j|``, which is checked
    in exact arithmetic.
    """
    if T < 1:
        raise RelaxationError("T must be positive")
    pv = p if isinstance(p, ProbVector) else ProbVector(tuple(p))
    exact = pv.rational or tuple(Fraction(v) for v in pv.probs)
    scaled = [v * T for v in exact]
    counts = [math.floor(s) for s in scaled]
    support = [j for j, v in enumerate(exact) if v > 0]
    deficit = T - sum(counts)
    if mode == "lowest":
        order = support
    elif mode == "largest_remainder":
        order = sorted(support, key=lambda j: (-(scaled[j] - counts[j]), j))
    else:
        raise RelaxationError(f"unknown rounding mode {mode!r}")
    if deficit > len(order) or deficit < 0:
        raise RelaxationError("probabilities do not sum to one closely enough to round")
    for j in order[:deficit]:
        counts[j] += 1
    bound = 1.0 / T
    gap = max(abs(Fraction(q, T) - v) for q, v in zip(counts, exact))
    if gap > Fraction(1, T):
        raise AssertionError(f"rounding moved a mass by {float(gap)} > 1/T")
    return CountVector(T, tuple(counts)), bound


@dataclass(frozen=True)
class EpsilonSchedule:
    schedule: Schedule
    T: int
    phi_T: float
    counts: CountVector
    lipschitz: float
    bound: float


def epsilon_schedule(r: RelaxationResult, eps: float, T: int | None = None) -> EpsilonSchedule:
    """Round the relaxation at ``T = ceil(L / eps)`` and evaluate it exactly.

    Locally Lipschitz aggregators are only covered when every stakeholder's
    rounding step ``mult_i / T`` stays inside its ball; otherwise
    :class:`RoundingGateError` reports the smallest admissible ``T``.
    """
    if not eps > 0:
        raise RelaxationError("eps must be positive")
    if r.instance is None:
        raise RelaxationError("relaxation result carries no instance")
    U = np.asarray(r.instance.utilities)
    L = _phi_lipschitz(r.unf, r.agg, U) * max(
        c * m for c, _, m in _stakeholder_terms(U, r.agg, r.p.probs))
    T_min = 1 if L == 0 else max(1, math.ceil(Fraction(L) / Fraction(eps)))
    if T is None:
        T = T_min
    elif T < T_min:
        raise RelaxationError(f"T={T} is below ceil(L/eps)={T_min}")
    need = 1
    for _, radius, mult in _stakeholder_terms(U, r.agg, r.p.probs):
        if math.isfinite(radius):
            if radius <= 0:
                raise RoundingGateError("a Lipschitz ball has radius 0 (percentile on a boundary); "
                                        "no horizon is covered, use a different aggregator", None)
            need = max(need, math.floor(mult / radius) + 1)
    if T < need:
        raise RoundingGateError(f"T={T} leaves a rounding step outside a Lipschitz ball; "
                                f"use T >= {need} or a globally Lipschitz aggregator", need)
    cv, _ = round_schedule(r.p, T)
    phi_T = evaluate_counts(r.instance, r.agg, r.unf, cv.counts)[0]
    bound = r.objective + L / T
    if phi_T > bound + 1e-9:
        raise AssertionError(f"rounding guarantee failed: {phi_T} > {bound}")
    return EpsilonSchedule(schedule_from_counts(cv), T, phi_T, cv, L, bound)
