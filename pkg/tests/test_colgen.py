import numpy as np
import pytest

from fairtime.aggregation import Average
from fairtime.colgen import (
    ColgenError,
    build_master,
    dual_violation,
    extract_duals,
    price,
    pricing_residuals,
    run_colgen,
    solve_master,
    trace_csv,
)
from fairtime.instance import Instance, alpha_filter
from fairtime.lp import LpProblem, solve_lp
from fairtime.relaxation import solve_relaxation
from fairtime.unfairness import Gap

from conftest import random_filtered


def _inst(U, c=None):
    U = np.array(U, dtype=float)
    return alpha_filter(Instance(U, np.ones(U.shape[1]) if c is None else np.array(c, dtype=float)))


def test_single_column_forces_p():
    fi = _inst([[1.0, 0.0], [3.0, 1.0]])
    st = solve_master(build_master(fi, active=[0]))
    assert st.probs == pytest.approx([1.0])
    assert st.value == pytest.approx(2.0)


def test_toy_full_master(toy):
    st = solve_master(build_master(toy))
    assert st.value == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(st.probs, [0.5, 0.5], atol=1e-9)


def test_pure_average_matches_relaxation():
    for seed in range(10):
        fi = random_filtered(seed, 3, 5)
        st = solve_master(build_master(fi, weights=(0.0, 1.0)))
        assert st.value == pytest.approx(solve_relaxation(fi, Average(), Gap()).objective, abs=1e-8)


def test_nu_is_rhs_subgradient():
    # p = r = 1 is a degenerate vertex: raising sum p is infeasible and the
    # left derivative is only one element of the subdifferential
    fi = _inst([[1.0, 0.0], [3.0, 1.0]])
    st = solve_master(build_master(fi, active=[1]))
    nu = extract_duals(st).nu
    lp = st.lp
    row = lp.row_names.index("nu")
    for h in (-1e-6, -1e-3, -0.1):
        rhs = lp.rhs.copy()
        rhs[row] += h
        bumped = solve_lp(LpProblem(lp.c, lp.A, lp.senses, rhs, lp.lower, lp.upper))
        assert bumped.objective >= st.value + nu * h - 1e-9
    assert st.last.dual_objective == pytest.approx(st.value, abs=1e-12)


def test_zero_utilities_zero_duals():
    fi = _inst([[0.0, 0.0], [0.0, 0.0]])
    d = extract_duals(solve_master(build_master(fi)))
    np.testing.assert_allclose(d.upsilon, 0, atol=1e-12)


def test_pricing_cases(toy):
    st = solve_master(build_master(toy))
    assert price(toy, extract_duals(st), st) is None
    st = solve_master(build_master(toy, active=[0]))
    assert price(toy, extract_duals(st), st) == 1
    dup = _inst([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    st = solve_master(build_master(dup, active=[0, 2]))
    assert pricing_residuals(dup, st, extract_duals(st))[1] >= -1e-7


def test_run_colgen_examples(toy):
    res = run_colgen(_inst([[0.2], [0.7]]))
    assert res.iterations == 1
    res = run_colgen(toy)
    assert res.iterations == 2 and res.value == pytest.approx(0, abs=1e-9)
    assert trace_csv(res).splitlines()[0] == "iteration,entering,master_value,max_dual_violation"


@pytest.mark.parametrize("seed", range(15))
def test_converges_to_full_master(seed):
    fi = random_filtered(seed, 3, 6)
    res = run_colgen(fi)
    full = solve_master(build_master(fi)).value
    assert res.value == pytest.approx(full, abs=1e-7)
    assert res.iterations <= fi.k + 1
    assert dual_violation(fi, res.state, extract_duals(res.state)) <= 1e-7


def test_strong_duality_of_master():
    fi = random_filtered(2, 3, 5)
    st = solve_master(build_master(fi))
    assert st.last.dual_objective == pytest.approx(st.value, abs=1e-8)


def test_bad_active_set(toy):
    with pytest.raises(ColgenError):
        build_master(toy, active=[])
    with pytest.raises(ColgenError):
        build_master(toy, active=[0, 0])
