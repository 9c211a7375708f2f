import numpy as np
import pytest
from sklearn.base import clone

from fairtime.estimator import FairnessOverTime
from fairtime.exact import solve_pe
from fairtime.instance import Instance, alpha_filter
from fairtime.aggregation import Minimum
from fairtime.unfairness import Gap

X_TOY = np.array([[1.0, 0.0], [0.0, 1.0]])


def test_pe_fit_transform():
    est = FairnessOverTime(method="pe", T=2)
    y = est.fit_transform(X_TOY)
    np.testing.assert_allclose(y, [0.5, 0.5])
    assert est.objective_ == 0 and est.horizon_ == 2
    np.testing.assert_array_equal(est.counts_, [1, 1])
    np.testing.assert_array_equal(est.schedule_, [0, 1])


def test_relax_fit():
    est = FairnessOverTime(method="relax", eps=0.1).fit(X_TOY)
    assert est.horizon_ == 20 and est.objective_ == 0
    assert est.relaxation_.objective == pytest.approx(0, abs=1e-12)


def test_matches_exact_module():
    rng = np.random.default_rng(0)
    X = rng.random((4, 3))
    c = rng.random(4)
    est = FairnessOverTime(aggregator="min", method="descriptive", T=3, alpha=0.5).fit(X, c)
    fi = alpha_filter(Instance(X.T, c, alpha=0.5))
    assert est.objective_ == solve_pe(fi, Minimum(), Gap(), 3).objective
    # filtered-out decisions are never scheduled
    dropped = np.setdiff1d(np.arange(4), est.kept_)
    assert np.all(est.counts_[dropped] == 0)


def test_params_and_clone():
    est = FairnessOverTime(aggregator="pctl:0.5", T=4)
    params = est.get_params()
    assert params["aggregator"] == "pctl:0.5" and params["T"] == 4
    other = clone(est).set_params(method="descriptive")
    assert other.method == "descriptive" and est.method == "pe"


def test_validation():
    with pytest.raises(ValueError, match="needs T"):
        FairnessOverTime(method="pe").fit(X_TOY)
    with pytest.raises(ValueError, match="method"):
        FairnessOverTime(method="magic", T=2).fit(X_TOY)
    with pytest.raises(ValueError):
        FairnessOverTime(T=2).fit(X_TOY, [1.0])
    with pytest.raises(ValueError):
        FairnessOverTime(T=2).fit([[np.nan, 1.0]])
    est = FairnessOverTime(T=2).fit(X_TOY)
    with pytest.raises(ValueError, match="shape"):
        est.transform(np.ones((3, 2)))


def test_transform_before_fit():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        FairnessOverTime().transform(X_TOY)
