import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from splitdoor.multiplicity import (
    IntervalMethod,
    assess,
    effect_interval,
    fndr_bound,
    nettleton_pi_indep,
    phi_prime,
    pvalue_histogram,
    storey_pi_indep,
    top_k_count,
    write_histogram_csv,
)

from oracles import interval_exact


def test_storey_all_null():
    p = np.linspace(0.01, 1.0, 100)  # exactly half above 0.5
    assert storey_pi_indep(p, 0.5) == 1.0


def test_storey_all_dependent():
    assert storey_pi_indep(np.linspace(0.001, 0.5, 50), 0.5) == 0.0


def test_storey_clamped():
    assert storey_pi_indep([0.9, 0.95, 0.99], 0.5) == 1.0


def test_storey_mixture(rng):
    m = 10_000
    p = np.concatenate([rng.uniform(size=7000), rng.beta(0.3, 30, size=3000)])
    assert storey_pi_indep(p, 0.5) == pytest.approx(0.70, abs=0.03)
    assert nettleton_pi_indep(p)[0] == pytest.approx(0.70, abs=0.03)
    assert p.size == m


@pytest.mark.parametrize("lam", [-0.1, 1.0])
def test_storey_lambda_domain(lam):
    with pytest.raises(ValueError):
        storey_pi_indep([0.5], lam)


def test_nettleton_flat():
    p = (np.arange(20) + 0.5) / 20
    pi, lam = nettleton_pi_indep(p, 20)
    assert (pi, lam) == (1.0, 0.0)


def test_nettleton_decreasing_hand_traced():
    # bins of width 0.25 with counts 40, 10, 6, 4
    p = np.concatenate([np.full(40, 0.1), np.full(10, 0.3), np.full(6, 0.6), np.full(4, 0.9)])
    assert list(pvalue_histogram(p, 4)[0]) == [40, 10, 6, 4]
    # bin 1: 40 > mean(10,6,4)=6.67; bin 2: 10 > mean(6,4)=5; bin 3: 6 > 4; falls through to I = B = 4
    pi, lam = nettleton_pi_indep(p, 4)
    assert lam == 0.75
    assert pi == pytest.approx(4 / (60 * 0.25))


def test_nettleton_stops_early():
    p = np.concatenate([np.full(30, 0.1), np.full(5, 0.3), np.full(10, 0.6), np.full(10, 0.9)])
    # bin 2: 5 <= mean(10,10) -> I = 2, lambda = 0.25
    pi, lam = nettleton_pi_indep(p, 4)
    assert lam == 0.25
    assert pi == pytest.approx(25 / (55 * 0.75))


def test_nettleton_bins_domain():
    with pytest.raises(ValueError):
        nettleton_pi_indep([0.5], 1)


def test_fndr_reported_inputs():
    assert fndr_bound(0.80, 0.187, 114469, 20000) == pytest.approx(0.21406, abs=1e-4)
    assert fndr_bound(0.95, 0.187, 114469, 7000) == pytest.approx(0.153, abs=1e-3)


def test_fndr_edge_cases():
    assert fndr_bound(0.9, 0.0, 100, 5) == 0.0
    with pytest.raises(ValueError, match="no discovered instances"):
        fndr_bound(0.9, 0.2, 100, 0)


def test_phi_prime():
    assert phi_prime(0.2, 100, 40) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        phi_prime(0.2, 100, 0)


def test_assess_consistency(rng):
    p = rng.uniform(size=500) ** 2
    rep = assess(p, 0.8, W=40, N=30)
    assert rep.pi_dep == 1 - rep.pi_indep_nettleton
    assert rep.phi == (1 - 0.8) * rep.pi_dep * 500 / 40
    assert rep.phi_prime == pytest.approx(rep.phi * 40 / 30)
    st_ = assess(p, 0.8, W=40, N=30, estimator="storey")
    assert st_.pi_dep == 1 - st_.pi_indep_storey
    assert assess(p, 0.8, W=0, N=0).phi is None


def test_phi_decreases_with_alpha(rng):
    p = rng.uniform(size=2000) ** 1.5
    alphas = [0.5, 0.7, 0.8, 0.9, 0.95]
    phis = [assess(p, a, int((p > a).sum()), 1).phi for a in alphas]
    # W(alpha) shrinks roughly like (1 - alpha) so phi stays flat or rises;
    # with W held fixed it must fall
    fixed = [fndr_bound(a, 0.3, 2000, 100) for a in alphas]
    assert all(x > y for x, y in zip(fixed, fixed[1:]))
    assert all(v is not None for v in phis)


def test_hand_interval():
    vals = (0.01, 0.02, 0.03, 0.10)
    iv = effect_interval(vals, 0.25, z=2.58)
    sigma = math.sqrt(0.005 / 3)
    assert iv.rho_maxsum == 0.10
    assert iv.rho_hat == pytest.approx(0.04, abs=1e-17)
    assert iv.lower == pytest.approx(0.04 - 0.025 - 2.58 * sigma / 2, abs=1e-15)
    assert iv.upper == pytest.approx(0.04 + 2.58 * sigma / 2, abs=1e-15)
    lo, hi, _, _ = interval_exact(vals, 0.25, 2.58)
    assert (iv.lower, iv.upper) == pytest.approx((lo, hi), abs=1e-15)


def test_zero_phi_symmetric():
    iv = effect_interval([0.1, 0.2, 0.4], 0.0)
    assert iv.rho_maxsum == 0
    assert iv.upper - iv.rho_hat == pytest.approx(iv.rho_hat - iv.lower)


def test_interval_errors():
    with pytest.raises(ValueError):
        effect_interval([], 0.1)
    with pytest.raises(ValueError):
        effect_interval([0.1], 1.5)


def test_top_k_float_noise():
    assert top_k_count(0.3, 10) == 3
    assert top_k_count(0.31, 10) == 4
    assert top_k_count(1.0, 7) == 7


finite = st.floats(0, 1, allow_nan=False)


@given(st.lists(finite, min_size=1, max_size=40), st.floats(0, 1))
def test_topk_dominates_mean(vals, phi):
    a = effect_interval(vals, phi, method=IntervalMethod.TOPK_EXACT)
    b = effect_interval(vals, phi, method="mean_approx")
    assert a.rho_maxsum >= b.rho_maxsum - 1e-12
    assert a.lower <= a.rho_hat <= a.upper
    assert b.lower <= b.rho_hat <= b.upper


def test_histogram_csv(tmp_path):
    path = tmp_path / "h.csv"
    write_histogram_csv([0.0, 0.5, 1.0], path, B=2)
    assert path.read_text().splitlines() == ["bin_lo,bin_hi,count", "0.0,0.5,1", "0.5,1.0,2"]


def test_reported_interval_shape_on_matched_inputs(rng):
    # rho_hat 2.6%, half-width 0.1 points, invalid share pulling 0.5 points off
    N = 1000
    v = rng.normal(size=N)
    v = (v - v.mean()) / v.std(ddof=1)
    sigma = 0.001 * math.sqrt(N) / 2.58
    vals = 0.026 + sigma * v
    iv = effect_interval(vals, 0.005 / 0.026, method=IntervalMethod.MEAN_APPROX)
    assert iv.lower == pytest.approx(0.020, abs=1e-9)
    assert iv.upper == pytest.approx(0.027, abs=1e-9)
