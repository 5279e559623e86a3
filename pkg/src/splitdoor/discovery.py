"""Independence screening over all candidate periods.

Testing and thresholding are separate steps: :func:`screen_periods` computes one
p-value per testable period (independent of alpha), and :func:`threshold`
turns those into a :class:`DiscoveryRun` at a given alpha. Re-thresholding the
same :class:`TestedPeriods` at several alphas is how the alpha sweep works.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import DataError, PairPeriod, is_constant
from .independence import (
    DEFAULT_RESAMPLES,
    IndependenceResult,
    NullPool,
    derive_seed,
    randomization_pvalue,
)

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.95

TESTED = "tested"
UNDEFINED = "estimand_undefined"
DEGENERATE_X = "degenerate_x"
CONSTANT_YD = "constant_y_d"

INSTANCES_HEADER = ("focal_id", "target_id", "period_index", "p_value", "statistic", "rho_ij_tau")


def period_status(pp: PairPeriod) -> str:
    if pp.x_window.sum() <= 0:
        return UNDEFINED
    if is_constant(pp.x_window):
        return DEGENERATE_X
    if is_constant(pp.y_d_window):
        return CONSTANT_YD
    return TESTED


@dataclass(frozen=True, eq=False)
class SplitDoorInstance:
    pair_period: PairPeriod
    independence: IndependenceResult
    rho_ij_tau: float

    @property
    def key(self):
        return self.pair_period.key


def instance_from(pp: PairPeriod, result: IndependenceResult) -> SplitDoorInstance:
    sx = float(pp.x_window.sum())
    if sx <= 0:
        raise ValueError(f"period {pp.key} has no focal visits; CTR undefined")
    return SplitDoorInstance(pp, result, float(pp.y_r_window.sum()) / sx)


@dataclass(frozen=True, eq=False)
class TestedPeriods:
    """Alpha-independent output of the screening step."""

    __test__ = False  # keep pytest from collecting the name

    periods: tuple[PairPeriod, ...]
    results: tuple[IndependenceResult, ...]
    excluded: dict[str, int]
    R: int
    seed: int

    @property
    def m(self) -> int:
        return len(self.results)

    @property
    def p_values(self) -> np.ndarray:
        return np.array([r.p_value for r in self.results])


@dataclass(frozen=True, eq=False)
class DiscoveryRun:
    alpha: float
    m: int
    W: int
    all_p_values: np.ndarray
    instances: tuple[SplitDoorInstance, ...]
    config: dict = field(default_factory=dict)

    @property
    def unique_focals(self) -> int:
        return len({inst.pair_period.focal_id for inst in self.instances})


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def _canonical(periods: Sequence[PairPeriod]) -> list[PairPeriod]:
    return sorted(periods, key=lambda pp: pp.key)


def screen_periods(
    periods: Sequence[PairPeriod],
    R: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    threads: int = 1,
) -> TestedPeriods:
    """Run the randomization test on every testable period.

    Periods with no focal visits, a constant focal window or a constant
    direct window are skipped and counted in ``excluded``; they do not enter
    ``m``. The null pool is built from the focal windows of the testable
    periods. Results come back in (focal, target, period) order and do not
    depend on ``threads``.
    """
    if not periods:
        raise DataError("no testable periods")
    periods = _canonical(periods)
    excluded = {UNDEFINED: 0, DEGENERATE_X: 0, CONSTANT_YD: 0}
    testable = []
    for pp in periods:
        status = period_status(pp)
        if status == TESTED:
            testable.append(pp)
        else:
            excluded[status] += 1
    if excluded[UNDEFINED]:
        logger.info("%d periods estimand-undefined (no focal visits)", excluded[UNDEFINED])
    if not testable:
        raise DataError("no testable periods")
    taus = {pp.tau for pp in testable}
    if len(taus) != 1:
        raise ValueError(f"periods mix window lengths {sorted(taus)}")

    pool = NullPool.from_periods(testable)

    def run(pp: PairPeriod) -> IndependenceResult:
        s = derive_seed(seed, pp.focal_id, pp.target_id, pp.period_index)
        return randomization_pvalue(pp, pool, R=R, seed=s)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, testable))
    else:
        results = [run(pp) for pp in testable]
    return TestedPeriods(tuple(testable), tuple(results), excluded, int(R), int(seed))


def threshold(tested: TestedPeriods, alpha: float = DEFAULT_ALPHA) -> DiscoveryRun:
    """Accept every tested period with p strictly above ``alpha``."""
    _check_alpha(alpha)
    instances = tuple(
        instance_from(pp, res)
        for pp, res in zip(tested.periods, tested.results)
        if res.p_value > alpha
    )
    return DiscoveryRun(
        alpha=float(alpha),
        m=tested.m,
        W=len(instances),
        all_p_values=tested.p_values,
        instances=instances,
        config={
            "tau": tested.periods[0].tau,
            "R": tested.R,
            "seed": tested.seed,
            "excluded": dict(tested.excluded),
        },
    )


def discover(
    periods: Sequence[PairPeriod],
    alpha: float = DEFAULT_ALPHA,
    R: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    threads: int = 1,
) -> DiscoveryRun:
    _check_alpha(alpha)
    return threshold(screen_periods(periods, R=R, seed=seed, threads=threads), alpha)


# ------------------------------------------------------------ serialization


def write_instances_csv(instances: Sequence[SplitDoorInstance], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(INSTANCES_HEADER)
        for inst in instances:
            pp, res = inst.pair_period, inst.independence
            w.writerow([pp.focal_id, pp.target_id, pp.period_index,
                        repr(res.p_value), repr(res.statistic), repr(inst.rho_ij_tau)])


def read_instances_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append({
                "focal_id": rec["focal_id"],
                "target_id": rec["target_id"],
                "period_index": int(rec["period_index"]),
                "p_value": float(rec["p_value"]),
                "statistic": float(rec["statistic"]),
                "rho_ij_tau": float(rec["rho_ij_tau"]),
            })
    return rows


def run_to_dict(run: DiscoveryRun) -> dict:
    return {
        "alpha": run.alpha,
        "m": run.m,
        "W": run.W,
        "unique_focals": run.unique_focals,
        "config": run.config,
        "p_values": [float(p) for p in run.all_p_values],
    }


def write_run_json(run: DiscoveryRun, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(run_to_dict(run), fh, indent=2)
