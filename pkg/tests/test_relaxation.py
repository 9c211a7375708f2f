import math
from fractions import Fraction

import numpy as np
import pytest

from fairtime.aggregation import (
    Average,
    LinearCombo,
    Maximum,
    MeanAbsDev,
    Minimum,
    Percentile,
    ThresholdExceedance,
)
from fairtime.exact import evaluate_counts, solve_pe
from fairtime.instance import Instance, alpha_filter
from fairtime.relaxation import (
    ProbVector,
    RelaxationError,
    RelaxationResult,
    RoundingGateError,
    check_perfect_fairness,
    epsilon_schedule,
    lcm_schedule,
    rationalize,
    round_schedule,
    solve_relaxation,
)
from fairtime.unfairness import Gap, MaxDeviationFromMean

from conftest import random_filtered

HALF_MIN_AVG = LinearCombo(((0.5, Minimum()), (0.5, Average())))


def test_toy_average(toy):
    r = solve_relaxation(toy, Average(), Gap())
    assert r.method == "lp"
    np.testing.assert_allclose(r.p.probs, [0.5, 0.5])
    assert r.objective == pytest.approx(0, abs=1e-12)
    assert r.lipschitz == 2.0


def test_toy_half_min_half_avg(toy):
    r = solve_relaxation(toy, HALF_MIN_AVG, Gap())
    assert r.method == "support_enum"
    np.testing.assert_allclose(r.p.probs, [0.5, 0.5])
    assert r.objective == pytest.approx(0, abs=1e-12)


def test_single_decision():
    fi = alpha_filter(Instance(np.array([[1.0], [4.0]]), np.array([1.0])))
    r = solve_relaxation(fi, Average(), Gap())
    assert r.p.probs == (1.0,) and r.objective == 3.0
    assert check_perfect_fairness(r).verdict == "not-perfect"


def test_unsupported_aggregator(toy):
    with pytest.raises(RelaxationError, match="supported"):
        solve_relaxation(toy, Percentile(0.5), Gap())


@pytest.mark.parametrize("agg", [Average(), Minimum(), Maximum(), ThresholdExceedance(0.5), HALF_MIN_AVG,
                                 MeanAbsDev(), LinearCombo(((0.5, Average()), (0.5, MeanAbsDev())))])
@pytest.mark.parametrize("unf", [Gap(), MaxDeviationFromMean()])
def test_lower_bound_against_pe(agg, unf):
    for seed in range(8):
        fi = random_filtered(seed, 1 + seed % 3, 1 + seed % 4)
        r = solve_relaxation(fi, agg, unf)
        best = min(solve_pe(fi, agg, unf, T).objective for T in range(1, 6))
        assert r.lower_bound <= best + 1e-9
        # the reported p really attains the reported objective
        assert r.objective >= -1e-12


def test_rationalize_examples():
    assert rationalize((0.5, 0.5)).rational == (Fraction(1, 2), Fraction(1, 2))
    assert rationalize((1 / 3, 2 / 3), max_denominator=3).rational == (Fraction(1, 3), Fraction(2, 3))
    s = 1 / math.sqrt(2)
    assert rationalize((s, 1 - s), max_denominator=100) is None


def test_lcm_schedule_examples():
    sched, T = lcm_schedule(ProbVector.from_fractions([Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)]))
    assert T == 6 and sched.picks == (0, 0, 0, 1, 1, 2)
    assert lcm_schedule(ProbVector.from_fractions([Fraction(1, 2)] * 2))[1] == 2
    assert lcm_schedule(ProbVector.from_fractions([Fraction(1), Fraction(0)]))[1] == 1
    with pytest.raises(RelaxationError):
        lcm_schedule(ProbVector((0.5, 0.5)))


def test_perfect_fairness_verdicts(toy):
    pf = check_perfect_fairness(solve_relaxation(toy, Average(), Gap()))
    assert pf.verdict == "achievable-with-finite-T" and pf.T == 2
    s = 1 / math.sqrt(2)
    synthetic = RelaxationResult(ProbVector((s, 1 - s)), 0.0, "lp", 2.0)
    assert check_perfect_fairness(synthetic).verdict == "zero-but-irrational"


@pytest.mark.parametrize("p,T,expected", [
    ((0.4, 0.6), 7, (3, 4)),
    ((1 / 3, 2 / 3), 3, (1, 2)),
    ((0.5, 0.5), 1, (1, 0)),
])
def test_round_schedule_examples(p, T, expected):
    cv, bound = round_schedule(ProbVector(p), T)
    assert cv.counts == expected and bound == 1 / T


def test_round_schedule_bound_is_exact():
    rng = np.random.default_rng(4)
    for _ in range(500):
        k = int(rng.integers(1, 7))
        p = rng.dirichlet(np.ones(k))
        p[rng.random(k) < 0.3] = 0
        if p.sum() == 0:
            p[0] = 1
        p = p / p.sum()
        T = int(rng.integers(1, 50))
        for mode in ("lowest", "largest_remainder"):
            cv, _ = round_schedule(ProbVector(tuple(p)), T, mode=mode)
            assert sum(cv.counts) == T
            assert all(q == 0 for q, v in zip(cv.counts, p) if v == 0)
            assert max(abs(Fraction(q, T) - Fraction(v)) for q, v in zip(cv.counts, p)) <= Fraction(1, T)


def test_epsilon_schedule_toy(toy):
    r = solve_relaxation(toy, Average(), Gap())
    e = epsilon_schedule(r, 0.1)
    assert e.T == 20 and e.phi_T == 0 and e.counts.counts == (10, 10)
    with pytest.raises(RelaxationError):
        epsilon_schedule(r, 0.1, T=5)


def test_epsilon_schedule_zero_lipschitz():
    fi = alpha_filter(Instance(np.array([[1.0, 1.0], [1.0, 1.0]]), np.ones(2)))
    r = solve_relaxation(fi, Average(), Gap())
    assert epsilon_schedule(r, 0.01).T == 1


def test_epsilon_schedule_locally_constant_minimum():
    for seed in range(10):
        fi = random_filtered(seed, 2, 4, resolution=4)
        r = solve_relaxation(fi, Minimum(), Gap())
        try:
            e = epsilon_schedule(r, 0.1)
        except RoundingGateError as exc:
            e = epsilon_schedule(r, 0.1, T=exc.required_T)
        assert e.phi_T == pytest.approx(r.objective, abs=1e-12)


def test_rounding_guarantee_average():
    for seed in range(30):
        fi = random_filtered(seed, 3, 6)
        r = solve_relaxation(fi, Average(), Gap())
        for eps in (0.5, 0.1, 0.02):
            e = epsilon_schedule(r, eps)
            assert e.T == max(1, math.ceil(Fraction(r.lipschitz) / Fraction(eps)))
            assert e.phi_T <= r.objective + eps + 1e-9
            assert evaluate_counts(fi, Average(), Gap(), e.counts.counts)[0] == e.phi_T
