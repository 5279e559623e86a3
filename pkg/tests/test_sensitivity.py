import warnings

import numpy as np
import pytest

from splitdoor.data import slice_periods
from splitdoor.discovery import discover
from splitdoor.sensitivity import (
    SensitivityConfig,
    inject_confound,
    linear_bias_prediction,
    ols_units,
    sensitivity_surface,
    write_surface_csv,
)
from splitdoor.synthgen import GeneratorParams, generate_panel


@pytest.fixture(scope="module")
def instances():
    panel, _ = generate_panel(GeneratorParams(n_pairs=300, n_days=45, seed=11))
    return list(discover(slice_periods(panel, 15), 0.1, R=100, seed=2).instances)


@pytest.mark.parametrize("args,expected", [((1, 1, 1), 1.0), ((0.5, -0.4, 1), -0.2), ((0.8, 0.8, 0.5), 0.32)])
def test_linear_prediction(args, expected):
    assert linear_bias_prediction(*args) == pytest.approx(expected)


def test_kappa_zero_identity(instances):
    out = inject_confound(instances, 1, 1, 0.0, seed=1)
    assert all(a is b for a, b in zip(out, instances))


def test_kappa_domain(instances):
    with pytest.raises(ValueError):
        inject_confound(instances, 1, 1, 1.5)
    with pytest.raises(ValueError):
        SensitivityConfig(kappa=-0.1)
    with pytest.raises(ValueError):
        inject_confound(instances, 1.5, 1, 1.0)


def test_count_perturbed(instances):
    out = inject_confound(instances, 0.5, 0.5, 0.5, seed=3)
    changed = sum(a is not b for a, b in zip(out, instances))
    assert changed == len(instances) // 2


def test_direct_untouched_and_deterministic(instances):
    a = inject_confound(instances, 0.7, -0.3, 1.0, seed=4)
    b = inject_confound(instances, 0.7, -0.3, 1.0, seed=4)
    for orig, x, y in zip(instances, a, b):
        assert np.array_equal(orig.pair_period.y_d_window, x.pair_period.y_d_window)
        assert np.array_equal(x.pair_period.x_window, y.pair_period.x_window)
        assert np.array_equal(x.pair_period.y_r_window, y.pair_period.y_r_window)


def test_c1_zero_keeps_x(instances):
    out = inject_confound(instances, 0.0, 1.0, 1.0, seed=5)
    for orig, new in zip(instances, out):
        assert np.array_equal(orig.pair_period.x_window, new.pair_period.x_window)


def test_standardized_preserves_moments(instances):
    out = inject_confound(instances, 0.6, 0.0, 1.0, seed=6)
    for orig, new in zip(instances, out):
        x0, x1 = orig.pair_period.x_window, new.pair_period.x_window
        assert x1.std(ddof=1) == pytest.approx(x0.std(ddof=1), rel=1e-9)


def test_unit_coefficients_ols(instances):
    base = ols_units(instances).mean()
    devs = [ols_units(inject_confound(instances, 1, 1, 1, seed=s)).mean() - base for s in range(3)]
    assert np.mean(devs) == pytest.approx(1.0, abs=0.05)


def test_raw_mode_clips_with_warning():
    panel, _ = generate_panel(GeneratorParams(n_pairs=50, n_days=30, base_x=0.5, base_yd=5, seed=1))
    periods = slice_periods(panel, 15)
    run = discover(periods, 0.05, R=50)
    with pytest.warns(UserWarning, match="clipped"):
        out = inject_confound(run.instances, 5, 5, 1.0, standardize=False)
    assert all((o.pair_period.x_window >= 0).all() for o in out)


def test_zero_grid_surface(instances):
    surf = sensitivity_surface(instances, SensitivityConfig((0.0,), (0.0,), 1.0))
    assert surf.cells[0].deviation == 0.0


def test_surface_reproducible_and_sign_symmetric(instances, tmp_path):
    cfg = SensitivityConfig((-1.0, 1.0), (-1.0, 1.0), 1.0, seed=3)
    a = sensitivity_surface(instances, cfg, estimator="ols")
    b = sensitivity_surface(instances, cfg, estimator="ols")
    assert a == b
    g = a.deviation_grid()
    assert g[0, 0] == pytest.approx(g[1, 1], abs=0.1)
    assert g[0, 1] == pytest.approx(g[1, 0], abs=0.1)
    write_surface_csv([a], tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "c1,c2,kappa,deviation,predicted_bias" and len(rows) == 5


def test_axis_cells_near_zero(instances):
    surf = sensitivity_surface(instances, SensitivityConfig((0.0, 1.0), (0.0, 1.0), 1.0), estimator="ols")
    for c in surf.cells:
        if c.c1 == 0 or c.c2 == 0:
            assert abs(c.deviation) < 4 * c.mc_se + 1e-12


def test_ratio_estimator_blind_to_zero_mean_confound(instances):
    # V has mean zero, so window sums and hence the ratio-of-sums CTR only
    # move by noise; the bilinear bias shows up in the OLS slope instead
    surf = sensitivity_surface(instances, SensitivityConfig((-1.0, 1.0), (-1.0, 1.0), 1.0))
    for c in surf.cells:
        assert abs(c.deviation) < 4 * c.mc_se
