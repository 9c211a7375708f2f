import math

import numpy as np
import pytest

from fairtime.lp import LpError, LpProblem, read_lp, solve_lp, write_lp

scipy_optimize = pytest.importorskip("scipy.optimize")


def _scipy(c, A, senses, b, lo, hi):
    Aub, bub, Aeq, beq = [], [], [], []
    for row, s, v in zip(A, senses, b):
        if s == "<=":
            Aub.append(row); bub.append(v)
        elif s == ">=":
            Aub.append(-row); bub.append(-v)
        else:
            Aeq.append(row); beq.append(v)
    bounds = [(None if math.isinf(l) else l, None if math.isinf(h) else h) for l, h in zip(lo, hi)]
    return scipy_optimize.linprog(c, A_ub=Aub or None, b_ub=bub or None, A_eq=Aeq or None,
                                  b_eq=beq or None, bounds=bounds, method="highs")


def test_small_known_optimum():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6
    p = LpProblem(np.array([-1.0, -1.0]), np.array([[1.0, 2.0], [3.0, 1.0]]), ("<=", "<="), np.array([4.0, 6.0]))
    r = solve_lp(p)
    assert r.optimal
    np.testing.assert_allclose(r.x, [1.6, 1.2])
    assert r.objective == pytest.approx(-2.8)
    # sensitivity duals of <= rows in a minimisation are non-positive
    assert np.all(r.duals <= 1e-12)
    assert r.dual_objective == pytest.approx(r.objective)


def test_infeasible_and_unbounded():
    p = LpProblem(np.array([1.0]), np.array([[1.0], [1.0]]), (">=", "<="), np.array([2.0, 1.0]))
    assert solve_lp(p).status == "infeasible"
    p = LpProblem(np.array([-1.0]), np.array([[1.0]]), (">=",), np.array([0.0]))
    assert solve_lp(p).status == "unbounded"


def test_dimension_mismatch():
    with pytest.raises(LpError):
        LpProblem(np.array([1.0]), np.array([[1.0]]), ("<=", "<="), np.array([1.0]))


@pytest.mark.parametrize("seed", range(5))
def test_matches_scipy_on_random_lps(seed):
    rng = np.random.default_rng(seed)
    for _ in range(60):
        m, n = rng.integers(1, 7), rng.integers(1, 7)
        A = rng.integers(-3, 4, (m, n)).astype(float)
        b = rng.integers(-3, 6, m).astype(float)
        c = rng.integers(-3, 4, n).astype(float)
        senses = tuple(rng.choice(["<=", ">=", "="], m))
        lo = np.where(rng.random(n) < 0.3, -np.inf, rng.integers(-2, 1, n).astype(float))
        hi = np.where(rng.random(n) < 0.5, np.inf, np.where(np.isinf(lo), 3.0, lo + rng.integers(0, 4, n)))
        r = solve_lp(LpProblem(c, A, senses, b, lo, hi))
        ref = _scipy(c, A, senses, b, lo, hi)
        expected = {0: "optimal", 2: "infeasible", 3: "unbounded"}[ref.status]
        assert r.status == expected
        if expected == "optimal":
            assert r.objective == pytest.approx(ref.fun, abs=1e-7)
            # strong duality from the returned multipliers
            assert r.dual_objective == pytest.approx(r.objective, abs=1e-7)


def test_dual_is_rhs_sensitivity():
    rng = np.random.default_rng(3)
    A = rng.random((3, 4)) + 0.1
    c = rng.random(4) + 0.1
    b = np.array([1.0, 2.0, 1.5])
    base = solve_lp(LpProblem(c, A, (">=",) * 3, b))
    h = 1e-6
    for i in range(3):
        bumped = b.copy()
        bumped[i] += h
        r = solve_lp(LpProblem(c, A, (">=",) * 3, bumped))
        assert (r.objective - base.objective) / h == pytest.approx(base.duals[i], abs=1e-4)
    assert np.all(base.duals >= -1e-12)


def test_lp_text_round_trip():
    names = ("x", "y")
    text = write_lp(names, np.array([1.0, -2.0]), [("r0", np.array([1.0, 1.0]), "<=", 3.0)],
                    np.array([0.0, -1.0]), np.array([math.inf, 2.0]), binaries=[0])
    p, binaries = read_lp(text)
    assert binaries == (0,)
    np.testing.assert_array_equal(p.c, [1.0, -2.0])
    assert p.senses == ("<=",)
    assert p.upper[0] == 1.0 and p.lower[1] == -1.0 and p.upper[1] == 2.0
