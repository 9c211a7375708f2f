"""Column generation for the weighted min-plus-average aggregator with gap.

The master is the linear relaxation (binaries relaxed to ``[0, 1]``, no
horizon integrality) of the probability-space model over a subset of
decisions.  Every row is kept in ``>=`` (or ``=``) orientation and every
variable is non-negative, so the LP duals are directly the multipliers
``alpha, beta, gamma, delta, upsilon, zeta, eta, theta, nu, lambda, mu``.

Utilities are shifted by their global minimum before building the master;
this keeps the aggregated values non-negative, as the sign conventions of
the dual require, and leaves the gap unchanged.

Adding a decision adds both a column group (``p, r, b``) and its rows.  A
candidate is priced by asking whether the current duals extend to the new
rows with no change in dual objective: with ``gamma = delta = lambda = mu
= 0`` for the new rows, the only freedom left is ``(eta, theta)``, and the
smallest total violation has a closed form.  A zero violation for every
candidate certifies optimality of the restricted master for the full set.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .encodings import DEFAULT_EPS
from .lp import LpProblem, LpResult, solve_lp

__all__ = [
    "MasterState",
    "DualVector",
    "ColgenResult",
    "ColgenError",
    "build_master",
    "extract_duals",
    "price",
    "pricing_residuals",
    "dual_violation",
    "run_colgen",
    "solve_master",
    "trace_csv",
]

PRICE_TOL = 1e-7


class ColgenError(RuntimeError):
    pass


@dataclass
class MasterState:
    active: tuple
    weights: tuple
    lp: LpProblem
    last: LpResult | None
    shift: float
    bigM: float
    eps: float
    utilities: np.ndarray = field(repr=False)  # shifted, n x |active|

    @property
    def value(self) -> float:
        if self.last is None or not self.last.optimal:
            raise ColgenError("master has no optimal solution")
        return self.last.objective

    @property
    def probs(self) -> np.ndarray:
        n, a = self.utilities.shape
        return self.last.x[2 + 2 * n: 2 + 2 * n + a]


@dataclass(frozen=True)
class DualVector:
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    upsilon: np.ndarray
    zeta: np.ndarray
    eta: np.ndarray
    theta: np.ndarray
    nu: float
    lam: np.ndarray
    mu: np.ndarray


def _shifted(fi):
    U = np.asarray(fi.utilities, dtype=float)
    shift = float(U.min())
    Us = U - shift
    return Us, shift, float(Us.max()) + 1.0


def build_master(fi, weights=(0.5, 0.5), active=None, eps: float = DEFAULT_EPS,
                 bigM: float | None = None) -> MasterState:
    """Restricted master LP over the decisions in ``active``.

    Variables, in order: ``f, g, y1 (n), y2 (n), p, r (|active|)`` and
    ``b`` (``n x |active|``, row major).  Rows follow the model listing:
    the ``alpha, beta`` bounds, ``gamma, delta`` min-links, the average
    definition ``upsilon``, the count link ``zeta`` (written
    ``sum_j r_j - sum_j b_ij = 1``), ``eta, theta`` support links, the
    simplex row ``nu`` and the ``lambda, mu`` upper bounds on ``r, b``.
    """
    active = tuple(range(fi.k)) if active is None else tuple(int(j) for j in active)
    if not active:
        raise ColgenError("active set is empty")
    if any(j < 0 or j >= fi.k for j in active) or len(set(active)) != len(active):
        raise ColgenError(f"active set {active} is not a set of decision indices")
    w1, w2 = (float(w) for w in weights)
    Us_all, shift, M_default = _shifted(fi)
    M = M_default if bigM is None else float(bigM)
    U = Us_all[:, list(active)]
    n, a = U.shape
    nv = 2 + 2 * n + 2 * a + n * a
    F, G = 0, 1
    y1 = lambda i: 2 + i
    y2 = lambda i: 2 + n + i
    p = lambda j: 2 + 2 * n + j
    r = lambda j: 2 + 2 * n + a + j
    b = lambda i, j: 2 + 2 * n + 2 * a + i * a + j

    rows, senses, rhs, names = [], [], [], []

    def add(name, entries, sense, value):
        row = np.zeros(nv)
        for col, v in entries:
            row[col] += v
        rows.append(row); senses.append(sense); rhs.append(float(value)); names.append(name)

    for i in range(n):
        add(f"alpha[{i}]", [(y1(i), w1), (y2(i), w2), (G, -1.0)], ">=", 0.0)
    for i in range(n):
        add(f"beta[{i}]", [(F, 1.0), (y1(i), -w1), (y2(i), -w2)], ">=", 0.0)
    for i in range(n):
        for j in range(a):
            add(f"gamma[{i},{j}]", [(y1(i), 1.0), (b(i, j), M), (r(j), -U[i, j])], ">=", 0.0)
    for i in range(n):
        for j in range(a):
            add(f"delta[{i},{j}]", [(r(j), U[i, j] - M), (y1(i), -1.0)], ">=", -M)
    for i in range(n):
        add(f"upsilon[{i}]", [(y2(i), 1.0)] + [(p(j), -U[i, j]) for j in range(a)], "=", 0.0)
    for i in range(n):
        add(f"zeta[{i}]", [(r(j), 1.0) for j in range(a)] + [(b(i, j), -1.0) for j in range(a)], "=", 1.0)
    for j in range(a):
        add(f"eta[{j}]", [(r(j), 1.0), (p(j), -1.0)], ">=", 0.0)
    for j in range(a):
        add(f"theta[{j}]", [(p(j), 1.0), (r(j), -eps)], ">=", 0.0)
    add("nu", [(p(j), 1.0) for j in range(a)], "=", 1.0)
    for j in range(a):
        add(f"lambda[{j}]", [(r(j), -1.0)], ">=", -1.0)
    for i in range(n):
        for j in range(a):
            add(f"mu[{i},{j}]", [(b(i, j), -1.0)], ">=", -1.0)

    c = np.zeros(nv)
    c[F], c[G] = 1.0, -1.0
    names_v = (["f", "g"] + [f"y1[{i}]" for i in range(n)] + [f"y2[{i}]" for i in range(n)]
               + [f"p[{j}]" for j in active] + [f"r[{j}]" for j in active]
               + [f"b[{i},{j}]" for i in range(n) for j in active])
    lp = LpProblem(c, np.array(rows), tuple(senses), np.array(rhs), np.zeros(nv), np.full(nv, math.inf),
                   var_names=tuple(names_v), row_names=tuple(names))
    return MasterState(active, (w1, w2), lp, None, shift, M, float(eps), U)


def solve_master(state: MasterState) -> MasterState:
    state.last = solve_lp(state.lp)
    if not state.last.optimal:
        raise ColgenError(f"master LP is {state.last.status}")
    return state


def extract_duals(state: MasterState) -> DualVector:
    if state.last is None or not state.last.optimal:
        raise ColgenError("duals need an optimal master")
    y = state.last.duals
    n, a = state.utilities.shape
    pos = 0

    def take(count, shape=None):
        nonlocal pos
        out = y[pos:pos + count].copy()
        pos += count
        return out.reshape(shape) if shape else out

    alpha, beta = take(n), take(n)
    gamma, delta = take(n * a, (n, a)), take(n * a, (n, a))
    upsilon, zeta = take(n), take(n)
    eta, theta = take(a), take(a)
    nu = float(take(1)[0])
    lam, mu = take(a), take(n * a, (n, a))
    return DualVector(alpha, beta, gamma, delta, upsilon, zeta, eta, theta, nu, lam, mu)


def _penalty(u, duals: DualVector, eps: float) -> float:
    """Least violation of the new column's dual rows at zero objective cost."""
    z = duals.zeta
    slack = float(u @ duals.upsilon) - duals.nu
    need = float(z.sum()) + max(0.0, -slack) - eps * max(0.0, slack)
    return float(np.maximum(0.0, -z).sum()) + max(0.0, need)


def pricing_residuals(fi, state: MasterState, duals: DualVector) -> dict:
    """Residual (``-violation``) of every inactive decision."""
    Us, _, _ = _shifted(fi)
    return {j: -_penalty(Us[:, j], duals, state.eps) for j in range(fi.k) if j not in state.active}


def price(fi, duals: DualVector, state: MasterState, tol: float = PRICE_TOL):
    """Inactive decision with the most negative residual, or ``None``."""
    res = pricing_residuals(fi, state, duals)
    best = None
    for j in sorted(res):
        if res[j] < -tol and (best is None or res[j] < res[best]):
            best = j
    return best


def dual_violation(fi, state: MasterState, duals: DualVector) -> float:
    """Largest violation of the dual rows over all decisions.

    Active decisions are checked with their actual multipliers (the ``r_j``
    row includes the ``-M sum_i delta_ij`` term of the big-M link);
    inactive ones with the zero-cost extension used by :func:`price`.
    """
    w1, w2 = state.weights
    M, eps = state.bigM, state.eps
    U = state.utilities
    d = duals
    checks = [
        d.beta.sum() - 1.0,
        1.0 - d.alpha.sum(),
        *(w1 * (d.alpha - d.beta) + (d.gamma - d.delta).sum(axis=1)),
        *(w2 * (d.alpha - d.beta) + d.upsilon),
        *(-(U.T @ d.upsilon) - d.eta + d.theta + d.nu),
        *((U * (d.delta - d.gamma)).sum(axis=0) - M * d.delta.sum(axis=0)
          + d.zeta.sum() + d.eta - eps * d.theta - d.lam),
        *(M * d.gamma - d.zeta[:, None] - d.mu).ravel(),
    ]
    worst = max(0.0, max(checks))
    res = pricing_residuals(fi, state, duals)
    if res:
        worst = max(worst, -min(res.values()))
    return float(worst)


@dataclass
class ColgenResult:
    state: MasterState
    value: float
    iterations: int
    trace: list  # of (iteration, entering, value, max_violation)

    @property
    def probs(self) -> dict:
        return dict(zip(self.state.active, self.state.probs))


def run_colgen(fi, weights=(0.5, 0.5), eps: float = DEFAULT_EPS, bigM: float | None = None,
               tol: float = PRICE_TOL) -> ColgenResult:
    """Grow the active set from the most efficient decision until pricing is clean."""
    c = np.asarray(fi.efficiency)
    active = [int(np.argmax(c))]
    cap = fi.k + 5
    trace = []
    for it in range(1, cap + 1):
        state = solve_master(build_master(fi, weights, active, eps, bigM))
        duals = extract_duals(state)
        viol = dual_violation(fi, state, duals)
        entering = price(fi, duals, state, tol)
        trace.append((it, "" if entering is None else entering, state.value, viol))
        if entering is None:
            return ColgenResult(state, state.value, it, trace)
        active.append(entering)
    raise ColgenError(f"column generation exceeded {cap} iterations")


def trace_csv(result: ColgenResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "entering", "master_value", "max_dual_violation"])
    for it, ent, val, viol in result.trace:
        w.writerow([it, ent, repr(float(val)), repr(float(viol))])
    return buf.getvalue()
