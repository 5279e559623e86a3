"""Linear structural-equation panels with known causal effect.

Per pair and day::

    x   = base_x  + eta * u_x + g1 * u_y + e_x
    y_d = base_yd + gamma3 * u_y + e_yd
    y_r = base_yr + rho * x + g2 * u_y + e_yr

with ``(g1, g2) = (gamma1, gamma2)`` for the confounded share of pairs and
``(0, 0)`` for the rest. Series are floored at zero afterwards; the floor rate
is reported so tests can bound its effect.

``u_y_mean`` shifts the latent demand level. A ratio-of-sums CTR only picks up
confounding through levels, so a positive ``u_y_mean`` is what makes the naive
CTR of confounded pairs overshoot ``rho``.
"""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import DailyPanel

TRUTH_HEADER = ("focal_id", "target_id", "confounded", "true_rho")


@dataclass
class GeneratorParams:
    rho: float = 0.05
    eta: float = 1.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    gamma3: float = 1.0
    noise_sd_x: float = 1.0
    noise_sd_yr: float = 1.0
    noise_sd_yd: float = 1.0
    u_x_sd: float = 1.0
    u_y_sd: float = 1.0
    u_y_mean: float = 0.0
    base_x: float = 100.0
    base_yd: float = 50.0
    base_yr: float = 0.0
    n_pairs: int = 100
    n_days: int = 90
    confounded_fraction: float = 1.0
    seed: int = 0
    u_y_dist: str = "normal"  # or "lognormal"
    u_y_ar: float = 0.0
    start_date: str = "2024-01-01"
    groups: tuple = ()
    group_rho: tuple = ()

    def validate(self) -> None:
        for name in ("noise_sd_x", "noise_sd_yr", "noise_sd_yd", "u_x_sd", "u_y_sd"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 <= self.confounded_fraction <= 1:
            raise ValueError("confounded_fraction must lie in [0, 1]")
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be >= 1")
        if self.n_days < 2:
            raise ValueError("n_days must be >= 2")
        if not -1 < self.u_y_ar < 1:
            raise ValueError("u_y_ar must lie in (-1, 1)")
        if self.u_y_dist not in ("normal", "lognormal"):
            raise ValueError(f"unknown u_y_dist {self.u_y_dist!r}")
        if self.group_rho and len(self.group_rho) != len(self.groups):
            raise ValueError("group_rho must match groups in length")


@dataclass
class GroundTruth:
    focal_ids: list
    target_ids: list
    confounded: np.ndarray
    true_rho: np.ndarray
    groups: list
    floor_rate: float
    params: dict = field(default_factory=dict)


def theoretical_cov(params: GeneratorParams) -> float:
    """Cov(X, Y_D) of a confounded pair under the linear model."""
    return params.gamma1 * params.gamma3 * params.u_y_sd ** 2


def _latent_u_y(rng: np.random.Generator, p: GeneratorParams) -> np.ndarray:
    n = p.n_days
    if p.u_y_dist == "lognormal":
        # unit-variance lognormal, recentred and rescaled to u_y_sd
        s = 0.75
        raw = rng.lognormal(0.0, s, size=n)
        m = np.exp(s ** 2 / 2)
        sd = np.sqrt((np.exp(s ** 2) - 1) * np.exp(s ** 2))
        z = (raw - m) / sd
    else:
        z = rng.standard_normal(n)
    if p.u_y_ar:
        # stationary AR(1) with unit marginal variance
        innov = z * np.sqrt(1 - p.u_y_ar ** 2)
        out = np.empty(n)
        out[0] = z[0]
        for t in range(1, n):
            out[t] = p.u_y_ar * out[t - 1] + innov[t]
        z = out
    return p.u_y_mean + p.u_y_sd * z


def generate_panel(params: GeneratorParams) -> tuple[DailyPanel, GroundTruth]:
    """Draw a panel; every pair gets its own focal and target product.

    Each pair uses a generator seeded from ``(seed, pair index)``, so a pair's
    series do not depend on how many other pairs are drawn.
    """
    p = params
    p.validate()
    width = len(str(p.n_pairs))
    n_conf = int(round(p.confounded_fraction * p.n_pairs))
    conf_rng = np.random.default_rng([p.seed, 0xC0F])
    confounded = np.zeros(p.n_pairs, dtype=bool)
    confounded[conf_rng.permutation(p.n_pairs)[:n_conf]] = True

    groups = [p.groups[i % len(p.groups)] for i in range(p.n_pairs)] if p.groups else [None] * p.n_pairs
    rhos = np.full(p.n_pairs, float(p.rho))
    if p.group_rho:
        lookup = dict(zip(p.groups, p.group_rho))
        rhos = np.array([lookup[g] for g in groups], dtype=float)

    shape = (p.n_pairs, p.n_days)
    x = np.empty(shape)
    y_r = np.empty(shape)
    y_d = np.empty(shape)
    for i in range(p.n_pairs):
        rng = np.random.default_rng([p.seed, i])
        u_y = _latent_u_y(rng, p)
        u_x = p.u_x_sd * rng.standard_normal(p.n_days)
        e_x, e_yr, e_yd = rng.standard_normal((3, p.n_days))
        g1, g2 = (p.gamma1, p.gamma2) if confounded[i] else (0.0, 0.0)
        x[i] = p.base_x + p.eta * u_x + g1 * u_y + p.noise_sd_x * e_x
        y_d[i] = p.base_yd + p.gamma3 * u_y + p.noise_sd_yd * e_yd
        y_r[i] = p.base_yr + rhos[i] * x[i] + g2 * u_y + p.noise_sd_yr * e_yr

    floored = int((x < 0).sum() + (y_r < 0).sum() + (y_d < 0).sum())
    np.maximum(x, 0, out=x)
    np.maximum(y_r, 0, out=y_r)
    np.maximum(y_d, 0, out=y_d)

    focal_ids = [f"f{i:0{width}d}" for i in range(p.n_pairs)]
    target_ids = [f"t{i:0{width}d}" for i in range(p.n_pairs)]
    start = np.datetime64(dt.date.fromisoformat(p.start_date), "D")
    panel = DailyPanel(
        dates=start + np.arange(p.n_days),
        pairs=tuple(zip(focal_ids, target_ids)),
        x=x,
        y_r=y_r,
        y_d=y_d,
        focal_groups={f: g for f, g in zip(focal_ids, groups) if g is not None},
    )
    truth = GroundTruth(
        focal_ids=focal_ids,
        target_ids=target_ids,
        confounded=confounded,
        true_rho=rhos,
        groups=groups,
        floor_rate=floored / (3 * x.size),
        params=asdict(p),
    )
    return panel, truth


def write_truth_csv(truth: GroundTruth, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRUTH_HEADER)
        for f, t, c, r in zip(truth.focal_ids, truth.target_ids, truth.confounded, truth.true_rho):
            w.writerow([f, t, int(bool(c)), repr(float(r))])


def pooled_cov(panel: DailyPanel) -> tuple[float, float]:
    """Pooled sample Cov(X, Y_D) over all pair-days and its standard error.

    Each pair is centred on its own means first, so differing base levels do
    not leak into the estimate.
    """
    xc = panel.x - panel.x.mean(axis=1, keepdims=True)
    yc = panel.y_d - panel.y_d.mean(axis=1, keepdims=True)
    prod = (xc * yc).ravel()
    n = prod.size
    dof = n - panel.n_pairs
    cov = prod.sum() / dof
    se = float(np.std(prod, ddof=1) / np.sqrt(n)) * n / dof
    return float(cov), se
