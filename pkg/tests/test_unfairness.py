import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairtime.unfairness import (
    Gap,
    MaxDeviationFromMean,
    Quadratic,
    UnfairnessError,
    format_unfairness,
    parse_unfairness,
    unfairness,
    unfairness_lipschitz,
    unfairness_rows,
)

LAPLACIAN3 = np.array([[2.0, -1, -1], [-1, 2, -1], [-1, -1, 2]])


def test_examples():
    assert unfairness(Gap(), [5, 6]) == 1
    for spec in (Gap(), MaxDeviationFromMean(), Quadratic(LAPLACIAN3)):
        assert unfairness(spec, [2.5, 2.5, 2.5]) == 0
    assert unfairness(MaxDeviationFromMean(), [0, 0, 3]) == 2
    # Laplacian of K3: sum over pairs of squared differences
    assert unfairness(Quadratic(LAPLACIAN3), [0, 1, 3]) == pytest.approx(1 + 9 + 4)


vectors = st.lists(st.floats(-50, 50), min_size=1, max_size=6)


@given(vectors, st.randoms(use_true_random=False))
@settings(max_examples=200, deadline=None)
def test_symmetric_and_nonnegative(y, rnd):
    z = list(y)
    rnd.shuffle(z)
    for spec in (Gap(), MaxDeviationFromMean()):
        assert unfairness(spec, y) >= 0
        assert unfairness(spec, z) == pytest.approx(unfairness(spec, y), abs=1e-9)


def test_rows_match_scalar():
    Y = np.random.default_rng(0).random((20, 3))
    for spec in (Gap(), MaxDeviationFromMean(), Quadratic(LAPLACIAN3)):
        np.testing.assert_allclose(unfairness_rows(spec, Y), [unfairness(spec, y) for y in Y], atol=1e-12)


@pytest.mark.parametrize("spec", [Gap(), MaxDeviationFromMean()])
def test_lipschitz_constant_sampled(spec):
    rng = np.random.default_rng(5)
    for n in (2, 3, 5):
        L = unfairness_lipschitz(spec, n)
        assert L == 2.0
        a = rng.normal(size=(20000, n))
        b = a + rng.uniform(-1, 1, size=(20000, n)) * rng.random((20000, 1))
        lhs = np.abs(unfairness_rows(spec, a) - unfairness_rows(spec, b))
        rhs = L * np.abs(a - b).max(axis=1)
        assert np.all(lhs <= rhs + 1e-12)


def test_quadratic_lipschitz_on_box():
    spec = Quadratic(LAPLACIAN3)
    with pytest.raises(UnfairnessError):
        unfairness_lipschitz(spec, 3)
    L = unfairness_lipschitz(spec, 3, box_radius=1.0)
    rng = np.random.default_rng(2)
    a = rng.uniform(-1, 1, (5000, 3))
    b = rng.uniform(-1, 1, (5000, 3))
    assert np.all(np.abs(unfairness_rows(spec, a) - unfairness_rows(spec, b))
                  <= L * np.abs(a - b).max(axis=1) + 1e-12)


@pytest.mark.parametrize("Q", [
    [[1.0, 0], [0, 1]],               # rows do not sum to zero
    [[1.0, -1], [-2, 2]],             # not symmetric
    [[-1.0, 1], [1, -1]],             # negative semidefinite
    np.zeros((3, 3)),                 # rank too small
])
def test_quadratic_validation(Q):
    with pytest.raises(UnfairnessError):
        Quadratic(np.array(Q))


def test_parse(tmp_path):
    assert parse_unfairness("gap") == Gap()
    assert parse_unfairness("maxdev") == MaxDeviationFromMean()
    path = tmp_path / "q.txt"
    np.savetxt(path, LAPLACIAN3)
    spec = parse_unfairness(f"quad:{path}")
    assert spec == Quadratic(LAPLACIAN3)
    assert format_unfairness(spec) == f"quad:{path}"
    with pytest.raises(UnfairnessError):
        parse_unfairness("envy")
    with pytest.raises(UnfairnessError):
        parse_unfairness(f"quad:{tmp_path / 'missing.txt'}")


def test_bad_vectors():
    with pytest.raises(UnfairnessError):
        unfairness(Gap(), [])
    with pytest.raises(UnfairnessError):
        unfairness(Gap(), [1.0, np.nan])
    with pytest.raises(UnfairnessError):
        unfairness(Quadratic(LAPLACIAN3), [1.0, 2.0])
