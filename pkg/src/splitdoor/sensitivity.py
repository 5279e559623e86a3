"""Sensitivity of the split-door estimate to a hidden confound of X and Y_R.

A confound ``V_Y`` that moves the focal series and the click-throughs but not
the direct visits slips through the independence screen. We inject such a
confound into a fraction ``kappa`` of accepted instances and measure how far
the estimate moves. Under a standardized linear model the expected shift of
an OLS slope is ``kappa * c1 * c2``.

Two injection modes:

``standardize=True`` (default)
    Works on the window in units of its own standard deviation ``s``. With
    ``z`` the standardized focal window and ``v`` the confound,
    ``x' = mean(x) + s * (sqrt(1 - c1**2) * z + c1 * v)`` keeps the window's
    mean level and variance, so ``x'`` stays standardized as the linear
    derivation assumes. The click-throughs follow the changed traffic at the
    instance's own CTR and pick up the direct confound term:
    ``y_r' = y_r + rho_ij * (x' - x) + c2 * s * v``. ``v`` starts as a fresh
    standard-normal draw; its within-window fluctuation is made orthogonal
    to ``z`` and rescaled to unit sample variance, and its window mean is kept
    as drawn. Requires ``|c1| <= 1``.

``standardize=False``
    Raw additive injection on the counts, ``x + c1 * v`` and ``y_r + c2 * v``
    with ``v`` standard normal, clipped at zero. Clipping attenuates the
    bias, so the number of clipped cells is reported with a warning.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .data import PairPeriod
from .discovery import SplitDoorInstance
from .estimation import aggregate_focal

SURFACE_HEADER = ("c1", "c2", "kappa", "deviation", "predicted_bias")


def linear_bias_prediction(c1: float, c2: float, kappa: float) -> float:
    return kappa * c1 * c2


@dataclass
class SensitivityConfig:
    c1_grid: Sequence[float] = (-1.0, -0.5, 0.0, 0.5, 1.0)
    c2_grid: Sequence[float] = (-1.0, -0.5, 0.0, 0.5, 1.0)
    kappa: float = 1.0
    seed: int = 0
    standardize: bool = True

    def __post_init__(self):
        if len(self.c1_grid) == 0 or len(self.c2_grid) == 0:
            raise ValueError("sensitivity grids must be nonempty")
        if not 0 <= self.kappa <= 1:
            raise ValueError(f"kappa must lie in [0, 1], got {self.kappa}")


def _check_kappa(kappa: float) -> None:
    if not 0 <= kappa <= 1:
        raise ValueError(f"kappa must lie in [0, 1], got {kappa}")


def _standardized_confound(rng: np.random.Generator, z: np.ndarray) -> np.ndarray:
    tau = z.size
    raw = rng.standard_normal(tau)
    mean = raw.mean()
    v = raw - mean
    zz = z @ z
    if zz > 0:
        v = v - (v @ z) / zz * z
    sd = np.std(v, ddof=1)
    if sd > 0:
        v = v / sd
    return mean + v


def _perturb(inst: SplitDoorInstance, c1, c2, rng, standardize) -> tuple[SplitDoorInstance, int]:
    pp = inst.pair_period
    x, y_r = pp.x_window, pp.y_r_window
    clipped = 0
    if standardize:
        mu = x.mean()
        s = float(np.std(x, ddof=1))
        z = (x - mu) / s if s > 0 else np.zeros_like(x)
        v = _standardized_confound(rng, z)
        if c1 == 0:
            x_new = np.array(x, dtype=float)  # exact: no rebuild round-off
        else:
            x_new = mu + s * (math.sqrt(1.0 - c1 * c1) * z + c1 * v)
        y_new = y_r + inst.rho_ij_tau * (x_new - x) + c2 * s * v
    else:
        v = rng.standard_normal(pp.tau)
        x_new = x + c1 * v
        y_new = y_r + c2 * v
        clipped = int((x_new < 0).sum() + (y_new < 0).sum())
        x_new = np.maximum(x_new, 0.0)
        y_new = np.maximum(y_new, 0.0)
    new_pp = replace(pp, x_window=x_new, y_r_window=y_new)
    sx = float(x_new.sum())
    rho = float(y_new.sum()) / sx if sx != 0 else float("nan")
    return SplitDoorInstance(new_pp, inst.independence, rho), clipped


def inject_confound(
    instances: Sequence[SplitDoorInstance],
    c1: float,
    c2: float,
    kappa: float,
    seed: int = 0,
    standardize: bool = True,
) -> list[SplitDoorInstance]:
    """Copy of ``instances`` with a hidden confound injected into floor(kappa*W) of them.

    The perturbed instances are chosen uniformly without replacement. Direct
    windows are never touched.
    """
    _check_kappa(kappa)
    if standardize and abs(c1) > 1:
        raise ValueError(f"standardized injection needs |c1| <= 1, got {c1}")
    out = list(instances)
    k = int(math.floor(kappa * len(out) + 1e-12))
    if k == 0:
        return out
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(len(out), size=k, replace=False))
    total_clipped = 0
    for i in chosen:
        out[i], clipped = _perturb(out[i], c1, c2, rng, standardize)
        total_clipped += clipped
    if total_clipped:
        warnings.warn(f"raw injection clipped {total_clipped} negative values at zero", stacklevel=2)
    return out


# --------------------------------------------------------------- estimators


def ratio_units(instances: Sequence[SplitDoorInstance]) -> np.ndarray:
    """Per focal-period total CTRs (the pipeline estimator's averaging units)."""
    return np.array([f.rho_i_tau for f in aggregate_focal(instances)])


def _ols_slope(pp: PairPeriod) -> float:
    xc = pp.x_window - pp.x_window.mean()
    sxx = xc @ xc
    return float(xc @ (pp.y_r_window - pp.y_r_window.mean()) / sxx) if sxx > 0 else float("nan")


def ols_units(instances: Sequence[SplitDoorInstance]) -> np.ndarray:
    """Per-instance OLS slope of the click-throughs on the focal series."""
    return np.array([_ols_slope(inst.pair_period) for inst in instances])


ESTIMATORS: dict[str, Callable] = {"ratio": ratio_units, "ols": ols_units}


@dataclass(frozen=True)
class SurfaceCell:
    c1: float
    c2: float
    kappa: float
    deviation: float
    predicted_bias: float
    mc_se: float


@dataclass(frozen=True)
class SensitivitySurface:
    cells: tuple[SurfaceCell, ...]
    estimator: str
    baseline: float

    def deviation_grid(self) -> np.ndarray:
        c1s = sorted({c.c1 for c in self.cells})
        c2s = sorted({c.c2 for c in self.cells})
        g = np.full((len(c1s), len(c2s)), np.nan)
        for c in self.cells:
            g[c1s.index(c.c1), c2s.index(c.c2)] = c.deviation
        return g


def cell_seed(base_seed: int, i: int, j: int) -> int:
    return int(np.random.SeedSequence([int(base_seed), i, j]).generate_state(1, np.uint64)[0])


def sensitivity_surface(
    instances: Sequence[SplitDoorInstance],
    config: SensitivityConfig,
    estimator="ratio",
) -> SensitivitySurface:
    """Estimate shift for every (c1, c2) cell of the grid.

    ``estimator`` is ``"ratio"`` (the pipeline's mean of per-focal CTRs),
    ``"ols"`` (mean per-instance OLS slope) or a callable mapping instances
    to per-unit values whose mean is the estimate. ``mc_se`` is the
    standard error of the mean per-unit shift.
    """
    if not instances:
        raise ValueError("no instances for sensitivity analysis")
    name = estimator if isinstance(estimator, str) else getattr(estimator, "__name__", "custom")
    units = ESTIMATORS[estimator] if isinstance(estimator, str) else estimator
    base_units = np.asarray(units(instances), dtype=float)
    baseline = float(np.mean(base_units))
    cells = []
    for i, c1 in enumerate(config.c1_grid):
        for j, c2 in enumerate(config.c2_grid):
            pert = inject_confound(instances, c1, c2, config.kappa,
                                   seed=cell_seed(config.seed, i, j),
                                   standardize=config.standardize)
            diff = np.asarray(units(pert), dtype=float) - base_units
            se = float(np.std(diff, ddof=1) / np.sqrt(diff.size)) if diff.size > 1 else float("nan")
            cells.append(SurfaceCell(float(c1), float(c2), float(config.kappa),
                                     float(np.mean(diff)),
                                     linear_bias_prediction(c1, c2, config.kappa), se))
    return SensitivitySurface(tuple(cells), name, baseline)


def write_surface_csv(surfaces: Sequence[SensitivitySurface], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SURFACE_HEADER)
        for surf in surfaces:
            for c in surf.cells:
                w.writerow([repr(c.c1), repr(c.c2), repr(c.kappa), repr(c.deviation), repr(c.predicted_bias)])
