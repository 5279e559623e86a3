import numpy as np
import pytest
from hypothesis import given, strategies as st

from splitdoor.independence import (
    NullPool,
    derive_seed,
    distance_correlation,
    randomization_pvalue,
    resampling_pvalue,
)

from conftest import make_period
from oracles import dcor_bruteforce

vec = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=16)


def test_perfect_dependence():
    assert distance_correlation([1, 2, 3, 4, 5], [1, 2, 3, 4, 5]) == pytest.approx(1.0, abs=1e-15)


def test_constant_vector_is_zero():
    assert distance_correlation([1, 2, 3], [7, 7, 7]) == 0.0


def test_small_example_matches_oracle():
    x, y = [1, 2, 3, 4], [1, 3, 2, 4]
    assert abs(distance_correlation(x, y) - dcor_bruteforce(x, y)) <= 1e-12


def test_oracle_on_small_integer_vectors(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 17))
        x, y = rng.integers(0, 4, n), rng.integers(0, 4, n)
        assert abs(distance_correlation(x, y) - dcor_bruteforce(x, y)) <= 1e-12


@pytest.mark.parametrize("x,y", [([1, 2], [1]), ([1], [1])])
def test_bad_lengths(x, y):
    with pytest.raises(ValueError):
        distance_correlation(x, y)


@given(st.data())
def test_symmetry_exact(data):
    x = data.draw(vec)
    y = data.draw(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=len(x), max_size=len(x)))
    assert distance_correlation(x, y) == distance_correlation(y, x)


@given(st.data(), st.floats(0.01, 100), st.floats(-100, 100))
def test_shift_scale_invariance(data, a, b):
    x = np.array(data.draw(st.lists(st.integers(-50, 50), min_size=3, max_size=16)), dtype=float)
    y = np.array(data.draw(st.lists(st.integers(-50, 50), min_size=x.size, max_size=x.size)), dtype=float)
    assert abs(distance_correlation(a * x + b, y) - distance_correlation(x, y)) <= 1e-9


@given(st.data())
def test_in_unit_interval(data):
    x = data.draw(vec)
    y = data.draw(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=len(x), max_size=len(x)))
    assert 0.0 <= distance_correlation(x, y) <= 1.0


def test_pvalue_counting_rule():
    assert resampling_pvalue(0.6, [0.2, 0.5, 0.9, 0.1]) == pytest.approx(0.4)


def test_pvalue_zero_statistic():
    assert resampling_pvalue(0.0, [0.0, 0.3, 0.1]) == 1.0


def test_pvalue_ties_count_as_extreme():
    assert resampling_pvalue(0.5, [0.5, 0.5]) == 1.0


@given(st.floats(0, 1), st.lists(st.floats(0, 1), min_size=1, max_size=50))
def test_pvalue_never_zero(s0, null):
    p = resampling_pvalue(s0, null)
    assert 1 / (1 + len(null)) <= p <= 1


def test_derive_seed_stable_and_distinct():
    assert derive_seed(0, "f", "t", 1) == derive_seed(0, "f", "t", 1)
    seeds = {derive_seed(0, "f", "t", k) for k in range(50)} | {derive_seed(1, "f", "t", 0)}
    assert len(seeds) == 51


def _pool(rng, n=30, tau=6):
    return [rng.normal(size=tau) for _ in range(n)]


def test_randomization_reproducible(rng):
    pool = _pool(rng)
    pp = make_period(rng.normal(size=6), rng.normal(size=6))
    a = randomization_pvalue(pp, pool, R=200, seed=5)
    b = randomization_pvalue(pp, pool, R=200, seed=5)
    assert a == b
    assert 1 / 201 <= a.p_value <= 1


def test_observed_matches_distance_correlation(rng):
    pp = make_period(rng.normal(size=8), rng.normal(size=8))
    res = randomization_pvalue(pp, _pool(rng, tau=8), R=10)
    assert res.statistic == pytest.approx(distance_correlation(pp.x_window, pp.y_d_window), abs=1e-15)


def test_own_window_excluded():
    # two-window pool: every draw must come from the other window
    x_own = np.array([0.0, 1, 2, 3])
    y = np.array([0.0, 1, 2, 3])
    other = np.array([3.0, 0, 2, 1])
    pp = make_period(x_own, y, focal="a")
    pp_other = make_period(other, y, focal="b")
    pool = NullPool.from_periods([pp, pp_other])
    res = randomization_pvalue(pp, pool, R=50)
    s_other = distance_correlation(other, y)
    assert res.statistic == pytest.approx(1.0)
    assert s_other < 1
    assert res.p_value == pytest.approx(1 / 51)


def test_single_window_pool_uses_itself():
    pp = make_period([0.0, 1, 2, 3], [0.0, 1, 2, 3])
    res = randomization_pvalue(pp, NullPool.from_periods([pp]), R=9)
    assert res.p_value == 1.0


def test_degenerate_flag():
    pp = make_period([1, 2, 3], [7, 7, 7])
    res = randomization_pvalue(pp, [np.array([1.0, 5, 2])], R=5)
    assert res.degenerate and res.statistic == 0.0 and res.p_value == 1.0


def test_pool_errors(rng):
    pp = make_period(rng.normal(size=5), rng.normal(size=5))
    with pytest.raises(ValueError):
        randomization_pvalue(pp, [], R=10)
    with pytest.raises(ValueError):
        randomization_pvalue(pp, [np.zeros(4)], R=10)
    with pytest.raises(ValueError):
        randomization_pvalue(pp, [np.arange(5.0)], R=0)


def test_pool_order_irrelevant(rng):
    periods = [make_period(rng.normal(size=5), rng.normal(size=5), focal=f"f{i}") for i in range(10)]
    a = NullPool.from_periods(periods)
    b = NullPool.from_periods(periods[::-1])
    r1 = randomization_pvalue(periods[3], a, R=100, seed=1)
    r2 = randomization_pvalue(periods[3], b, R=100, seed=1)
    assert r1 == r2
