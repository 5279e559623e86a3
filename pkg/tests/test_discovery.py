import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splitdoor.data import DataError, filter_constant_direct, slice_periods
from splitdoor.discovery import (
    CONSTANT_YD,
    DEGENERATE_X,
    UNDEFINED,
    TestedPeriods,
    discover,
    read_instances_csv,
    screen_periods,
    threshold,
    write_instances_csv,
)
from splitdoor.independence import IndependenceResult
from splitdoor.synthgen import GeneratorParams, generate_panel

from conftest import make_period


def fake_tested(pvals):
    periods, results = [], []
    for k, p in enumerate(pvals):
        pp = make_period([1.0, 2, 3], [1.0, 0, 2], y_r=[0.1, 0.1, 0.1], target=f"t{k}")
        periods.append(pp)
        results.append(IndependenceResult(pp.focal_id, pp.target_id, 0, 0.1, p, 100, 0, False))
    return TestedPeriods(tuple(periods), tuple(results), {}, 100, 0)


@pytest.fixture(scope="module")
def panel_periods():
    panel, _ = generate_panel(GeneratorParams(n_pairs=60, n_days=45, gamma1=1, gamma3=1,
                                              confounded_fraction=0.5, seed=4))
    return filter_constant_direct(slice_periods(panel, 15))


@pytest.fixture(scope="module")
def tested(panel_periods):
    return screen_periods(panel_periods, R=200, seed=9)


def test_accept_above_alpha():
    run = threshold(fake_tested([0.97]), 0.95)
    assert run.W == 1
    assert run.instances[0].rho_ij_tau == pytest.approx(0.3 / 6)


def test_boundary_is_strict():
    assert threshold(fake_tested([0.95]), 0.95).W == 0


@pytest.mark.parametrize("alpha", [0, 1, -0.1, 1.5])
def test_alpha_domain(alpha):
    with pytest.raises(ValueError):
        threshold(fake_tested([0.5]), alpha)


def test_empty_period_list():
    with pytest.raises(DataError):
        discover([], 0.5, R=10)


def test_exclusions_not_in_m():
    good = make_period([1.0, 2, 3, 5], [2.0, 1, 4, 3], target="a")
    zero_x = make_period([0.0] * 4, [2.0, 1, 4, 3], target="b")
    const_x = make_period([3.0] * 4, [2.0, 1, 4, 3], target="c")
    const_yd = make_period([1.0, 2, 3, 5], [4.0] * 4, target="d")
    tested = screen_periods([good, zero_x, const_x, const_yd], R=20)
    assert tested.m == 1
    assert tested.excluded == {UNDEFINED: 1, DEGENERATE_X: 1, CONSTANT_YD: 1}


def test_m_counts_every_period(panel_periods, tested):
    assert tested.m == len(panel_periods)
    assert sorted(r.key for r in tested.results) == sorted(pp.key for pp in panel_periods)
    assert len({r.key for r in tested.results}) == tested.m


def test_invariants(tested):
    run = threshold(tested, 0.5)
    assert run.W == len(run.instances) <= run.m
    assert np.all(run.all_p_values >= 1 / (1 + tested.R)) and np.all(run.all_p_values <= 1)
    for inst in run.instances:
        assert inst.independence.p_value > 0.5
        pp = inst.pair_period
        assert inst.rho_ij_tau == pp.y_r_window.sum() / pp.x_window.sum()


@settings(max_examples=30)
@given(st.floats(0.01, 0.98), st.floats(0.01, 0.98))
def test_monotone_in_alpha(tested, a, b):
    lo, hi = sorted((a, b))
    keys_lo = {i.key for i in threshold(tested, lo).instances}
    keys_hi = {i.key for i in threshold(tested, hi).instances}
    assert keys_hi <= keys_lo


def test_rerun_and_threads_identical(panel_periods, tested):
    again = screen_periods(panel_periods[::-1], R=200, seed=9, threads=3)
    assert again.results == tested.results


def test_discover_equals_threshold(panel_periods, tested):
    a = discover(panel_periods, 0.8, R=200, seed=9)
    b = threshold(tested, 0.8)
    assert [i.key for i in a.instances] == [i.key for i in b.instances]


def test_instances_csv_roundtrip(tmp_path, tested):
    run = threshold(tested, 0.3)
    path = tmp_path / "inst.csv"
    write_instances_csv(run.instances, path)
    rows = read_instances_csv(path)
    assert [(r["focal_id"], r["target_id"], r["period_index"]) for r in rows] == [i.key for i in run.instances]
    assert [r["rho_ij_tau"] for r in rows] == [i.rho_ij_tau for i in run.instances]
    assert [r["p_value"] for r in rows] == [i.independence.p_value for i in run.instances]


def test_strong_confounding_rarely_accepted():
    panel, _ = generate_panel(GeneratorParams(n_pairs=100, n_days=45, gamma1=10, gamma3=10, seed=2))
    run = discover(slice_periods(panel, 15), 0.95, R=200, seed=0)
    assert run.W / run.m <= 0.05
