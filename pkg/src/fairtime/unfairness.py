"""Unfairness functions over aggregated utility vectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Gap",
    "MaxDeviationFromMean",
    "Quadratic",
    "UnfairnessError",
    "unfairness",
    "unfairness_lipschitz",
    "parse_unfairness",
    "format_unfairness",
]

EQUAL_TOL = 1e-12


class UnfairnessError(ValueError):
    pass


@dataclass(frozen=True)
class Gap:
    """``max(y) - min(y)``."""


@dataclass(frozen=True)
class MaxDeviationFromMean:
    """``max_i |y_i - mean(y)|``."""


@dataclass(frozen=True, eq=False)
class Quadratic:
    """``y' Q y`` with ``Q`` symmetric PSD and ``Q 1 = 0``.

    ``Q`` must also have rank ``n - 1`` so that the value vanishes only on
    constant vectors.
    """

    Q: np.ndarray
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise UnfairnessError("Q must be a square matrix")
        if not np.all(np.isfinite(Q)):
            raise UnfairnessError("Q must have finite entries")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise UnfairnessError("Q must be symmetric")
        scale = max(1.0, float(np.abs(Q).max()))
        if np.abs(Q.sum(axis=1)).max() > 1e-9 * scale:
            raise UnfairnessError("Q must have zero row sums")
        eig = np.linalg.eigvalsh(Q)
        if eig[0] < -1e-9 * scale:
            raise UnfairnessError("Q must be positive semidefinite")
        n = Q.shape[0]
        if n > 1 and np.sum(eig > 1e-9 * scale) != n - 1:
            raise UnfairnessError("Q must vanish only on constant vectors (rank n-1)")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    def __eq__(self, other):
        return isinstance(other, Quadratic) and np.array_equal(self.Q, other.Q)

    def __hash__(self):
        return hash(self.Q.tobytes())


def unfairness(spec, y) -> float:
    y = np.asarray(y, dtype=float).ravel()
    if y.size == 0:
        raise UnfairnessError("empty utility vector")
    if not np.all(np.isfinite(y)):
        raise UnfairnessError("utility vector must be finite")
    if isinstance(spec, Gap):
        return float(y.max() - y.min())
    if isinstance(spec, MaxDeviationFromMean):
        return float(np.abs(y - math.fsum(y) / y.size).max())
    if isinstance(spec, Quadratic):
        if spec.Q.shape[0] != y.size:
            raise UnfairnessError(
                f"Q is {spec.Q.shape[0]}x{spec.Q.shape[0]} but y has length {y.size}")
        # centre first: Q 1 = 0 makes this exact algebra, and it keeps the
        # value non-negative in floating point
        z = y - y.mean()
        return max(0.0, float(z @ spec.Q @ z))
    raise UnfairnessError(f"unknown unfairness spec {spec!r}")


def unfairness_rows(spec, Y: np.ndarray) -> np.ndarray:
    """Vectorised :func:`unfairness` over the rows of ``Y``."""
    Y = np.asarray(Y, dtype=float)
    if isinstance(spec, Gap):
        return Y.max(axis=1) - Y.min(axis=1)
    if isinstance(spec, MaxDeviationFromMean):
        return np.abs(Y - Y.mean(axis=1, keepdims=True)).max(axis=1)
    if isinstance(spec, Quadratic):
        Z = Y - Y.mean(axis=1, keepdims=True)
        return np.maximum(0.0, np.einsum("ri,ij,rj->r", Z, spec.Q, Z))
    raise UnfairnessError(f"unknown unfairness spec {spec!r}")


def unfairness_lipschitz(spec, n: int, box_radius: float | None = None) -> float:
    """Global Lipschitz constant with respect to the sup-norm on ``y``.

    The quadratic form is only Lipschitz on a bounded box
    ``|y_i| <= box_radius``.
    """
    if n < 1:
        raise UnfairnessError("n must be positive")
    if isinstance(spec, (Gap, MaxDeviationFromMean)):
        return 2.0
    if isinstance(spec, Quadratic):
        if box_radius is None:
            raise UnfairnessError("quadratic unfairness needs a box radius for a Lipschitz constant")
        if spec.Q.shape[0] != n:
            raise UnfairnessError("dimension mismatch for Q")
        q_inf = float(np.abs(spec.Q).sum(axis=1).max())
        return 2.0 * n * q_inf * float(box_radius)
    raise UnfairnessError(f"unknown unfairness spec {spec!r}")


def parse_unfairness(text: str):
    s = text.strip()
    if s == "gap":
        return Gap()
    if s == "maxdev":
        return MaxDeviationFromMean()
    if s.startswith("quad:"):
        path = s[5:]
        try:
            Q = np.loadtxt(path, ndmin=2)
        except OSError as exc:
            raise UnfairnessError(f"cannot read Q from {path}: {exc}") from None
        return Quadratic(Q, source=path)
    raise UnfairnessError(f"unknown unfairness {text!r} (expected gap, maxdev or quad:<file>)")


def format_unfairness(spec) -> str:
    if isinstance(spec, Gap):
        return "gap"
    if isinstance(spec, MaxDeviationFromMean):
        return "maxdev"
    if isinstance(spec, Quadratic):
        return f"quad:{spec.source}" if spec.source else "quad:<inline>"
    raise UnfairnessError(f"unknown unfairness spec {spec!r}")
