"""scikit-learn style front end.

``X`` holds one row per candidate decision and one column per stakeholder
(the transpose of :attr:`Instance.utilities`); ``y`` is the optional
efficiency of each decision.  ``fit`` chooses how often each decision is
taken over the horizon and ``transform`` reports the resulting aggregated
utility of every stakeholder.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .aggregation import parse_aggregator
from .distributional import dist_aggregate, distribution_from_weights
from .exact import solve_descriptive, solve_pe
from .instance import Instance, alpha_filter
from .relaxation import epsilon_schedule, solve_relaxation
from .unfairness import parse_unfairness

__all__ = ["FairnessOverTime"]

_METHODS = ("descriptive", "pe", "relax")


class FairnessOverTime(TransformerMixin, BaseEstimator):
    """Choose a fair multiset of decisions over a horizon.

    Parameters
    ----------
    aggregator, unfairness : str
        Text forms accepted by :func:`parse_aggregator` and
        :func:`parse_unfairness`.
    method : {"descriptive", "pe", "relax"}
        Exact enumeration over sequences or count vectors (both need ``T``),
        or the relaxation rounded to within ``eps``.
    T : int, optional
        Horizon for the exact methods; for ``relax`` an explicit horizon at
        least ``ceil(L / eps)``.
    eps : float
        Additive tolerance for ``relax``.
    alpha : float
        Efficiency threshold in ``(0, 1]``.
    """

    def __init__(self, aggregator="avg", unfairness="gap", method="pe", T=None, eps=0.1, alpha=1.0):
        self.aggregator = aggregator
        self.unfairness = unfairness
        self.method = method
        self.T = T
        self.eps = eps
        self.alpha = alpha

    def _specs(self):
        return parse_aggregator(self.aggregator), parse_unfairness(self.unfairness)

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if y is None:
            c = X.sum(axis=1)
        else:
            c = check_array(y, dtype=float, ensure_2d=False)
            if c.ndim != 1 or c.shape[0] != X.shape[0]:
                raise ValueError(f"y must have one efficiency per row of X ({X.shape[0]})")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")
        agg, unf = self._specs()
        fi = alpha_filter(Instance(X.T, c, alpha=self.alpha))
        self.n_features_in_ = X.shape[1]
        self.kept_ = np.array(fi.kept)
        if self.method in ("descriptive", "pe"):
            if self.T is None:
                raise ValueError(f"method {self.method!r} needs T")
            solver = solve_descriptive if self.method == "descriptive" else solve_pe
            sol = solver(fi, agg, unf, int(self.T))
            local, self.objective_ = sol.count_vector.counts, sol.objective
            self.relaxation_ = None
        else:
            r = solve_relaxation(fi, agg, unf)
            rounded = epsilon_schedule(r, self.eps, T=None if self.T is None else int(self.T))
            local, self.objective_ = rounded.counts.counts, rounded.phi_T
            self.relaxation_ = r
        counts = np.zeros(X.shape[0], dtype=int)
        counts[self.kept_] = local
        self.counts_ = counts
        self.horizon_ = int(counts.sum())
        self.probs_ = counts / self.horizon_
        self.schedule_ = np.repeat(np.arange(X.shape[0]), counts)
        self._agg = agg
        return self

    def transform(self, X):
        """Aggregated utility of each stakeholder, shape ``(n_stakeholders,)``."""
        check_is_fitted(self, "counts_")
        X = check_array(X, dtype=float)
        if X.shape != (self.counts_.size, self.n_features_in_):
            raise ValueError(f"X must have shape {(self.counts_.size, self.n_features_in_)}, got {X.shape}")
        return np.array([dist_aggregate(self._agg, distribution_from_weights(col, self.counts_, counts=self.counts_))
                         for col in X.T])
