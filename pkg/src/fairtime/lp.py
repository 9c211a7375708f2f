"""Dense two-phase primal simplex.

Small, deterministic, and returns row duals, which the column generation
and the relaxation need.  Pivoting uses the most negative reduced cost for
the first ``3 * (rows + cols)`` iterations and Bland's rule afterwards, so
it cannot cycle.

Duals follow the sensitivity convention: ``duals[i]`` is the rate of change
of the optimal objective per unit increase of ``rhs[i]``.  For a
minimisation this makes duals of ``>=`` rows non-negative and of ``<=`` rows
non-positive.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

__all__ = ["LpProblem", "LpResult", "LpError", "solve_lp", "read_lp", "write_lp"]

FEAS_TOL = 1e-8
PIVOT_TOL = 1e-10
COST_TOL = 1e-10
MAX_ITER = 100_000
MAX_SIZE = 10**6

SENSES = ("<=", ">=", "=")


class LpError(RuntimeError):
    pass


@dataclass
class LpProblem:
    """``min c'x`` subject to ``A x (sense) rhs`` and ``lower <= x <= upper``."""

    c: np.ndarray
    A: np.ndarray
    senses: tuple
    rhs: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    var_names: tuple | None = None
    row_names: tuple | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n) if n else np.zeros((len(self.senses), 0))
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        self.senses = tuple(self.senses)
        m = self.A.shape[0]
        if self.rhs.size != m or len(self.senses) != m:
            raise LpError(f"dimension mismatch: A has {m} rows, rhs {self.rhs.size}, senses {len(self.senses)}")
        if any(s not in SENSES for s in self.senses):
            raise LpError(f"senses must be among {SENSES}")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).ravel()
        if self.lower.size != n or self.upper.size != n:
            raise LpError("bounds must match the number of variables")
        for arr, name in ((self.c, "c"), (self.A, "A"), (self.rhs, "rhs")):
            if not np.all(np.isfinite(arr)):
                raise LpError(f"{name} must be finite")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise LpError("bounds must not be NaN")
        if np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise LpError("lower bounds cannot be +inf and upper bounds cannot be -inf")

    @property
    def num_vars(self) -> int:
        return self.c.size

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float | None = None
    reduced_costs: np.ndarray | None = None
    dual_objective: float | None = None
    iterations: int = 0
    basis: tuple = field(default=())

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    """Dense tableau that is refactored from the original rows after every
    pivot, so rounding error does not accumulate along the path."""

    def __init__(self, A, b, basis, n_cols):
        m = A.shape[0]
        self.Ab = np.hstack([A, b[:, None]])
        self.T = np.zeros((m + 1, n_cols + 1))
        self.T[:m] = self.Ab
        self.cost = np.zeros(n_cols)
        self.basis = list(basis)
        self.iterations = 0

    def set_objective(self, cost):
        self.cost = np.zeros(self.T.shape[1] - 1)
        self.cost[: cost.size] = cost
        self._price()

    def _price(self):
        T = self.T
        m = T.shape[0] - 1
        cb = self.cost[self.basis]
        T[-1, :-1] = self.cost - cb @ T[:m, :-1]
        T[-1, -1] = -(cb @ T[:m, -1])
        T[-1, self.basis] = 0.0

    def pivot(self, r, q):
        T = self.T
        T[r, :] /= T[r, q]
        col = T[:, q].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r, :])
        T[:, q] = 0.0
        T[r, q] = 1.0
        self.basis[r] = q
        self.iterations += 1
        if self.iterations > MAX_ITER:
            raise LpError(f"simplex iteration cap {MAX_ITER} exceeded")
        self._refactor()

    def _refactor(self):
        m = self.T.shape[0] - 1
        try:
            X = np.linalg.solve(self.Ab[:, self.basis], self.Ab)
        except np.linalg.LinAlgError:
            return  # keep the incrementally updated tableau
        X[:, self.basis] = np.eye(m)
        self.T[:m] = X
        self._price()

    def drop_rows(self, keep):
        self.Ab = self.Ab[keep]
        self.T = np.vstack([self.T[:-1][keep], self.T[-1:]])
        self.basis = [j for j, k in zip(self.basis, keep) if k]
        self._refactor()

    def run(self, allowed, bland_after):
        """Minimise the current objective row; returns 'optimal' or 'unbounded'."""
        T = self.T
        m = T.shape[0] - 1
        while True:
            rc = T[-1, :-1]
            cand = np.flatnonzero((rc < -COST_TOL) & allowed)
            if cand.size == 0:
                return "optimal"
            if self.iterations < bland_after:
                q = int(cand[np.argmin(rc[cand])])
            else:
                q = int(cand[0])
            col = T[:m, q]
            rows = np.flatnonzero(col > PIVOT_TOL)
            if rows.size == 0:
                return "unbounded"
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            if self.iterations < bland_after:
                # largest pivot element among the ties, for stability
                r = int(ties[np.argmax(col[ties])])
            else:
                # Bland: smallest basic variable index
                r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(r, q)


def _standardize(p: LpProblem):
    """Rewrite as ``min c's  s.t.  A s = b, s >= 0`` with ``b >= 0``.

    Returns the pieces plus the maps needed to recover ``x`` and duals.
    """
    n = p.num_vars
    cols = []  # (original var, sign)
    shift = np.zeros(n)
    extra_rows = []  # (var index, bound) for upper bounds of doubly bounded vars
    for j in range(n):
        lo, hi = p.lower[j], p.upper[j]
        if math.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if math.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif math.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ns = len(cols)
    M = np.zeros((p.num_rows, ns))
    cs = np.zeros(ns)
    for s, (j, sign) in enumerate(cols):
        M[:, s] = sign * p.A[:, j]
        cs[s] = sign * p.c[j]
    b = p.rhs - p.A @ shift
    senses = list(p.senses)
    rows = [M]
    rhs = [b]
    for s, bound in extra_rows:
        row = np.zeros((1, ns))
        row[0, s] = 1.0
        rows.append(row)
        rhs.append(np.array([bound]))
        senses.append("<=")
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    const = float(p.c @ shift)
    return A, b, senses, cs, cols, shift, const


def solve_lp(p: LpProblem) -> LpResult:
    if p.num_rows * max(1, p.num_vars) > MAX_SIZE:
        raise LpError("problem exceeds the dense size limit")
    if np.any(p.lower > p.upper):
        return LpResult("infeasible")
    A, b, senses, cs, cols, shift, const = _standardize(p)
    m, ns = A.shape
    # slack/surplus columns
    slack_cols = []
    for i, s in enumerate(senses):
        if s == "<=":
            slack_cols.append((i, 1.0))
        elif s == ">=":
            slack_cols.append((i, -1.0))
    n_slack = len(slack_cols)
    A_full = np.zeros((m, ns + n_slack))
    A_full[:, :ns] = A
    slack_of_row = {}
    for k, (i, sign) in enumerate(slack_cols):
        A_full[i, ns + k] = sign
        slack_of_row[i] = ns + k
    flip = b < 0
    A_full[flip] *= -1
    b = np.where(flip, -b, b)
    # initial basis: slack with +1 coefficient, else an artificial
    basis = []
    art_rows = []
    basis_unit = [False] * m
    for i in range(m):
        j = slack_of_row.get(i)
        if j is not None and A_full[i, j] > 0:
            basis.append(j)
            basis_unit[i] = True
        else:
            basis.append(None)
            art_rows.append(i)
    n_real = ns + n_slack
    n_art = len(art_rows)
    A_tab = np.zeros((m, n_real + n_art))
    A_tab[:, :n_real] = A_full
    for k, i in enumerate(art_rows):
        A_tab[i, n_real + k] = 1.0
        basis[i] = n_real + k
    tab = _Tableau(A_tab, b, basis, n_real + n_art)
    bland_after = 3 * (m + n_real)

    if n_art:
        phase1 = np.zeros(n_real + n_art)
        phase1[n_real:] = 1.0
        tab.set_objective(phase1)
        tab.run(np.ones(n_real + n_art, dtype=bool), bland_after)
        infeas = -tab.T[-1, -1]
        if infeas > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LpResult("infeasible", iterations=tab.iterations)
        # drive remaining artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if tab.basis[r] >= n_real:
                row = tab.T[r, :n_real]
                cand = np.flatnonzero(np.abs(row) > 1e-9)
                if cand.size:
                    tab.pivot(r, int(cand[0]))
                else:
                    keep[r] = False
        if not keep.all():
            tab.drop_rows(keep)
    # phase 2 over real columns only
    cost = np.zeros(n_real + n_art)
    cost[:ns] = cs
    tab.set_objective(cost)
    allowed = np.zeros(n_real + n_art, dtype=bool)
    allowed[:n_real] = True
    status = tab.run(allowed, bland_after)
    if status == "unbounded":
        return LpResult("unbounded", iterations=tab.iterations)

    sol = np.zeros(n_real + n_art)
    for r, j in enumerate(tab.basis):
        sol[j] = tab.T[r, -1]
    s_vals = sol[:ns]
    x = shift.copy()
    for s, (j, sign) in enumerate(cols):
        x[j] += sign * s_vals[s]

    # duals from the objective row: each row owns a unit column (its +1
    # slack or its artificial) whose reduced cost is minus the row's dual
    unit = [slack_of_row[i] if basis_unit[i] else None for i in range(m)]
    for k, i in enumerate(art_rows):
        unit[i] = n_real + k
    y = np.array([-tab.T[-1, j] for j in unit])
    y = np.where(flip, -y, y)
    duals = y[: p.num_rows]
    # reduced costs of the original variables (bound rows folded in)
    red = p.c - p.A.T @ duals
    objective = float(p.c @ x)
    dual_obj = float(p.rhs @ duals)
    for j in range(p.num_vars):
        d = red[j]
        if d > 0 and math.isfinite(p.lower[j]):
            dual_obj += d * p.lower[j]
        elif d < 0 and math.isfinite(p.upper[j]):
            dual_obj += d * p.upper[j]
    return LpResult("optimal", x=x, duals=duals, objective=objective,
                    reduced_costs=red, dual_objective=dual_obj,
                    iterations=tab.iterations, basis=tuple(tab.basis))


# -- LP text format ------------------------------------------------------------
#
#   \ comment
#   Minimize
#    obj: 1 x + -2 y
#   Subject To
#    c0: 1 x + 1 y <= 4
#   Bounds
#    -inf <= y <= inf
#   Binaries
#    b0
#   End
#
# One term per "coef name" pair joined by " + "; bilinear terms are written
# "coef [ a * b ]" and are rejected by read_lp.

_TERM = re.compile(r"^([-+0-9.eEinf]+)\s+([A-Za-z_][A-Za-z0-9_\[\],.]*)$")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_lp(names, c, rows, lower, upper, binaries=(), comment=None, bilinear=None) -> str:
    """Render a model in the LP text format.

    ``rows`` is a list of ``(label, coeffs, sense, rhs)``; ``bilinear`` maps
    a row label to a list of ``(coef, name_a, name_b)``.
    """
    bilinear = bilinear or {}
    out = []
    if comment:
        out.extend("\\ " + line for line in comment.splitlines())
    out.append("Minimize")
    terms = [f"{_fmt(v)} {names[j]}" for j, v in enumerate(c) if v != 0]
    out.append(" obj: " + (" + ".join(terms) if terms else "0"))
    out.append("Subject To")
    for label, coeffs, sense, rhs in rows:
        terms = [f"{_fmt(v)} {names[j]}" for j, v in enumerate(coeffs) if v != 0]
        terms += [f"{_fmt(w)} [ {a} * {b} ]" for w, a, b in bilinear.get(label, ())]
        out.append(f" {label}: {' + '.join(terms) if terms else '0'} {sense} {_fmt(rhs)}")
    out.append("Bounds")
    for j, name in enumerate(names):
        lo, hi = lower[j], upper[j]
        if lo == 0 and hi == math.inf:
            continue
        out.append(f" {_fmt(lo)} <= {name} <= {_fmt(hi)}")
    if binaries:
        out.append("Binaries")
        out.extend(f" {names[j]}" for j in binaries)
    out.append("End")
    return "\n".join(out) + "\n"


def _parse_expr(text: str, index: dict, n: int) -> np.ndarray:
    coeffs = np.zeros(n)
    text = text.strip()
    if text == "0":
        return coeffs
    for term in text.split(" + "):
        term = term.strip()
        if "[" in term:
            raise LpError("bilinear terms cannot be read into a linear program")
        mt = _TERM.match(term)
        if not mt or mt.group(2) not in index:
            raise LpError(f"bad term {term!r}")
        coeffs[index[mt.group(2)]] += float(mt.group(1))
    return coeffs


def read_lp(text: str) -> tuple[LpProblem, tuple]:
    """Parse LP text into a continuous :class:`LpProblem`.

    Binary variables are relaxed to ``[0, 1]``; their indices are returned
    alongside the problem.
    """
    lines = [ln.rstrip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("\\")]
    section = None
    obj_line = None
    row_lines, bound_lines, bin_lines = [], [], []
    for ln in lines:
        key = ln.strip().lower()
        if key in ("minimize", "subject to", "bounds", "binaries", "end"):
            section = key
            continue
        if section == "minimize":
            obj_line = ln
        elif section == "subject to":
            row_lines.append(ln)
        elif section == "bounds":
            bound_lines.append(ln)
        elif section == "binaries":
            bin_lines.append(ln.strip())
        else:
            raise LpError(f"unexpected line {ln!r}")
    if obj_line is None:
        raise LpError("missing objective")
    # variable names in order of first appearance
    names = []
    seen = set()

    def collect(expr):
        for term in expr.split(" + "):
            parts = term.strip().split()
            if len(parts) == 2 and parts[1] not in seen:
                seen.add(parts[1])
                names.append(parts[1])

    obj_expr = obj_line.split(":", 1)[1]
    collect(obj_expr)
    parsed_rows = []
    for ln in row_lines:
        label, body = ln.split(":", 1)
        m = re.match(r"^(.*)\s(<=|>=|=)\s(\S+)$", body.strip())
        if not m:
            raise LpError(f"bad constraint {ln!r}")
        collect(m.group(1))
        parsed_rows.append((label.strip(), m.group(1), m.group(2), float(m.group(3))))
    bounds = {}
    for ln in bound_lines:
        m = re.match(r"^(\S+)\s<=\s(\S+)\s<=\s(\S+)$", ln.strip())
        if not m:
            raise LpError(f"bad bound {ln!r}")
        if m.group(2) not in seen:
            seen.add(m.group(2))
            names.append(m.group(2))
        bounds[m.group(2)] = (float(m.group(1)), float(m.group(3)))
    for name in bin_lines:
        if name not in seen:
            seen.add(name)
            names.append(name)
    index = {nm: j for j, nm in enumerate(names)}
    n = len(names)
    c = _parse_expr(obj_expr, index, n)
    A = np.array([_parse_expr(e, index, n) for _, e, _, _ in parsed_rows]).reshape(-1, n)
    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    for nm, (lo, hi) in bounds.items():
        lower[index[nm]], upper[index[nm]] = lo, hi
    binaries = tuple(index[nm] for nm in bin_lines)
    for j in binaries:
        lower[j], upper[j] = max(lower[j], 0.0), min(upper[j], 1.0)
    prob = LpProblem(c, A, tuple(s for _, _, s, _ in parsed_rows),
                     np.array([r for *_, r in parsed_rows]), lower, upper,
                     var_names=tuple(names), row_names=tuple(lb for lb, *_ in parsed_rows))
    return prob, binaries
