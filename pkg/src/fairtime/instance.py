"""Problem instances: decisions, stakeholder utilities and efficiency values.

An :class:`Instance` holds ``k`` candidate decisions, an ``n x k`` utility
matrix (``utilities[i, j]`` is what stakeholder ``i`` gets from decision
``j``) and the efficiency ``c_j`` of each decision.  :func:`alpha_filter`
keeps the decisions whose efficiency is within a factor ``alpha`` of the
best one; every solver works on the resulting :class:`FilteredInstance`.

Instance files are JSON objects with the fields ``n``, ``k``, ``alpha``,
``utilities``, ``efficiency`` and optionally ``labels``.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "Instance",
    "FilteredInstance",
    "InstanceError",
    "alpha_filter",
    "gen_tsp_pickup",
    "gen_ambulance",
    "gen_random",
    "validate_instance",
    "load_instance",
    "save_instance",
    "instance_to_dict",
]

MAX_TSP_STAKEHOLDERS = 9

_FIELDS = {"n", "k", "alpha", "utilities", "efficiency", "labels"}


class InstanceError(ValueError):
    """Invalid instance data; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True, eq=False)
class Instance:
    utilities: np.ndarray
    efficiency: np.ndarray
    alpha: float = 1.0
    labels: tuple | None = None

    def __post_init__(self):
        U = np.array(self.utilities, dtype=float)
        c = np.array(self.efficiency, dtype=float)
        if U.ndim != 2 or U.shape[0] < 1 or U.shape[1] < 1:
            raise InstanceError("utilities", "must be a non-empty n x k matrix")
        if not np.all(np.isfinite(U)):
            raise InstanceError("utilities", "entries must be finite")
        if c.ndim != 1 or c.shape[0] != U.shape[1]:
            raise InstanceError("efficiency", f"must have length k={U.shape[1]}")
        if not np.all(np.isfinite(c)):
            raise InstanceError("efficiency", "entries must be finite")
        alpha = float(self.alpha)
        if not (0.0 < alpha <= 1.0):
            raise InstanceError("alpha", f"must lie in (0, 1], got {self.alpha}")
        labels = self.labels
        if labels is not None:
            labels = tuple(str(s) for s in labels)
            if len(labels) != U.shape[1]:
                raise InstanceError("labels", f"must have length k={U.shape[1]}")
        U.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "utilities", U)
        object.__setattr__(self, "efficiency", c)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.utilities.shape[0]

    @property
    def k(self) -> int:
        return self.utilities.shape[1]

    def __eq__(self, other):
        return (isinstance(other, Instance)
                and np.array_equal(self.utilities, other.utilities)
                and np.array_equal(self.efficiency, other.efficiency)
                and self.alpha == other.alpha and self.labels == other.labels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FilteredInstance:
    """The alpha-efficient decisions of ``base``.

    Solvers index decisions by their position in ``kept``; ``utilities`` is
    the matching ``n x len(kept)`` slice.
    """

    base: Instance
    kept: tuple
    opt: float
    utilities: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def k(self) -> int:
        return len(self.kept)

    @property
    def efficiency(self) -> np.ndarray:
        return self.base.efficiency[list(self.kept)]


def _filter_indices(c: np.ndarray, alpha: float, candidates: Sequence[int]):
    opt = float(max(c[j] for j in candidates))
    threshold = alpha * opt
    return [j for j in candidates if c[j] >= threshold], opt


def alpha_filter(inst: Instance, offset: bool = False, candidates=None) -> FilteredInstance:
    """Keep decisions with ``c_j >= alpha * opt``.

    The inequality is applied verbatim; with a negative ``opt`` it is the
    stricter side.  ``offset=True`` shifts efficiencies by ``-min(c)`` first,
    the usual reading for cost-type metrics.
    """
    c = np.asarray(inst.efficiency, dtype=float)
    if offset:
        c = c - c.min()
    elif c.max() < 0:
        warnings.warn("optimal efficiency is negative; alpha-threshold applied verbatim "
                      "(use offset=True for cost-type metrics)", stacklevel=2)
    pool = range(inst.k) if candidates is None else sorted(candidates)
    kept, opt = _filter_indices(c, inst.alpha, pool)
    if not kept:
        raise InstanceError("alpha", f"no decision has c_j >= alpha*opt = {inst.alpha * opt!r}; "
                                     "with opt < 0 try offset=True")
    U = inst.utilities[:, kept]
    U.setflags(write=False)
    return FilteredInstance(base=inst, kept=tuple(kept), opt=opt, utilities=U)


def _dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def gen_tsp_pickup(points, hub, alpha: float = 1.0, efficiency: str = "tour") -> Instance:
    """One decision per pickup order of ``n`` stakeholders.

    A tour leaves ``hub``, visits the points in the given order and returns.
    Stakeholder ``i`` suffers the time spent in the vehicle, i.e. the tour
    length from its pickup point back to the hub (speed 1), so its utility is
    the negative of that.  ``efficiency`` is ``"tour"`` (negative tour
    length) or ``"welfare"`` (sum of utilities).
    """
    pts = [tuple(map(float, p)) for p in points]
    hub = tuple(map(float, hub))
    n = len(pts)
    if n < 1:
        raise InstanceError("points", "need at least one stakeholder")
    if n > MAX_TSP_STAKEHOLDERS:
        raise InstanceError("points", f"n={n} exceeds {MAX_TSP_STAKEHOLDERS} (n! decisions)")
    if efficiency not in ("tour", "welfare"):
        raise InstanceError("efficiency", "mode must be 'tour' or 'welfare'")
    perms = list(itertools.permutations(range(n)))
    U = np.zeros((n, len(perms)))
    c = np.zeros(len(perms))
    labels = []
    for j, order in enumerate(perms):
        stops = [hub] + [pts[i] for i in order] + [hub]
        legs = [_dist(stops[s], stops[s + 1]) for s in range(len(stops) - 1)]
        # remaining[s] = length from stop s to the final hub
        remaining = np.cumsum(legs[::-1])[::-1]
        for pos, i in enumerate(order):
            U[i, j] = -remaining[pos + 1]
        c[j] = -sum(legs)
        labels.append("-".join(str(i) for i in order))
    if efficiency == "welfare":
        c = U.sum(axis=0)
    return Instance(U, c, alpha=alpha, labels=tuple(labels))


def gen_ambulance(bases, streets, cutoff: float = 15.0, alpha: float = 1.0) -> Instance:
    """One decision per ambulance base.

    Travel time is Euclidean distance at one unit per minute; street ``i``
    gets ``max(0, cutoff - time)``.  Efficiency is total utility.
    """
    if len(bases) == 0:
        raise InstanceError("bases", "need at least one base")
    if len(streets) == 0:
        raise InstanceError("streets", "need at least one street")
    if not cutoff > 0:
        raise InstanceError("cutoff", "must be positive")
    U = np.array([[max(0.0, cutoff - _dist(b, s)) for b in bases] for s in streets])
    labels = tuple(f"base{j}" for j in range(len(bases)))
    return Instance(U, U.sum(axis=0), alpha=alpha, labels=labels)


def gen_random(n: int, k: int, seed: int = 0, alpha: float = 1.0,
               resolution: int | None = None) -> Instance:
    """Uniform utilities and efficiencies in ``[0, 1]``.

    With ``resolution=r`` utilities are rounded to multiples of ``1/r``,
    which makes relaxation optima rational with small denominators.
    """
    if n < 1 or k < 1:
        raise InstanceError("n" if n < 1 else "k", "must be positive")
    rng = np.random.default_rng(seed)
    U = rng.random((n, k))
    c = rng.random(k)
    if resolution is not None:
        U = np.round(U * resolution) / resolution
    return Instance(U, c, alpha=alpha)


def instance_to_dict(inst: Instance) -> dict:
    out = {
        "n": inst.n,
        "k": inst.k,
        "alpha": inst.alpha,
        "utilities": inst.utilities.tolist(),
        "efficiency": inst.efficiency.tolist(),
    }
    if inst.labels is not None:
        out["labels"] = list(inst.labels)
    return out


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate_instance(raw: dict) -> Instance:
    """Build an :class:`Instance` from parsed file content."""
    if not isinstance(raw, dict):
        raise InstanceError("<root>", "instance must be an object")
    unknown = set(raw) - _FIELDS
    if unknown:
        raise InstanceError(sorted(unknown)[0], "unknown field")
    for name in ("n", "k", "alpha", "utilities", "efficiency"):
        if name not in raw:
            raise InstanceError(name, "missing")
    n, k = raw["n"], raw["k"]
    for name, value in (("n", n), ("k", k)):
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise InstanceError(name, "must be a positive integer")
    alpha = raw["alpha"]
    if not _is_number(alpha) or not (0.0 < alpha <= 1.0):
        raise InstanceError("alpha", f"must lie in (0, 1], got {alpha!r}")
    U = raw["utilities"]
    if not isinstance(U, list) or len(U) != n:
        raise InstanceError("utilities", f"expected {n} rows")
    for i, row in enumerate(U):
        if not isinstance(row, list) or len(row) != k:
            raise InstanceError(f"utilities[{i}]", f"expected {k} entries")
        for j, x in enumerate(row):
            if not _is_number(x) or not math.isfinite(x):
                raise InstanceError(f"utilities[{i}][{j}]", "must be a finite number")
    c = raw["efficiency"]
    if not isinstance(c, list) or len(c) != k:
        raise InstanceError("efficiency", f"expected {k} entries")
    for j, x in enumerate(c):
        if not _is_number(x) or not math.isfinite(x):
            raise InstanceError(f"efficiency[{j}]", "must be a finite number")
    labels = raw.get("labels")
    if labels is not None:
        if not isinstance(labels, list) or len(labels) != k or not all(isinstance(s, str) for s in labels):
            raise InstanceError("labels", f"expected {k} strings")
    return Instance(np.array(U, dtype=float), np.array(c, dtype=float), alpha=alpha,
                    labels=tuple(labels) if labels is not None else None)


def load_instance(path) -> Instance:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError("<file>", f"not valid JSON: {exc}") from None
    return validate_instance(raw)


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1) + "\n", encoding="utf-8")
