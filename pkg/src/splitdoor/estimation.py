"""Effect aggregation: per-instance CTR -> per-focal totals -> mean effect."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import PairPeriod
from .discovery import SplitDoorInstance

GROUPS_HEADER = ("group", "n_instances", "n_focals", "causal_ctr", "naive_ctr")
UNKNOWN_GROUP = "unknown"


@dataclass(frozen=True)
class FocalEstimate:
    focal_id: str
    period_index: int
    rho_i_tau: float
    n_targets: int
    x_total: float = 0.0


@dataclass(frozen=True)
class EffectEstimate:
    rho_hat: float
    sigma_hat: float
    N: int
    naive_rho: float | None = None
    groups: tuple = field(default=())


def aggregate_focal(instances: Sequence[SplitDoorInstance]) -> list[FocalEstimate]:
    """Sum per-target CTRs within each (focal, period)."""
    if not instances:
        raise ValueError("no split-door instances to aggregate")
    acc: dict[tuple[str, int], list] = defaultdict(list)
    x_tot: dict[tuple[str, int], float] = {}
    for inst in instances:
        pp = inst.pair_period
        acc[pp.focal_key].append((pp.target_id, inst.rho_ij_tau))
        x_tot[pp.focal_key] = float(pp.x_window.sum())
    out = []
    for key in sorted(acc):
        # sum in target order so the total does not depend on input order
        vals = [r for _, r in sorted(acc[key])]
        out.append(FocalEstimate(key[0], key[1], math.fsum(vals), len(vals), x_tot[key]))
    return out


def mean_effect(focals: Sequence[FocalEstimate], weighted: bool = False) -> EffectEstimate:
    """Mean of the per-focal totals and their sample standard deviation.

    ``weighted=True`` weights each focal-period by its focal visits instead
    of the default unweighted mean.
    """
    if not focals:
        raise ValueError("no focal estimates")
    vals = np.array([f.rho_i_tau for f in sorted(focals, key=lambda f: (f.focal_id, f.period_index))])
    n = len(vals)
    if weighted:
        w = np.array([f.x_total for f in sorted(focals, key=lambda f: (f.focal_id, f.period_index))])
        rho = float(np.sum(w * vals) / np.sum(w))
    else:
        rho = math.fsum(vals) / n
    sigma = float(np.std(vals, ddof=1)) if n > 1 else 0.0
    return EffectEstimate(rho_hat=rho, sigma_hat=sigma, N=n)


def naive_ctr(periods: Sequence[PairPeriod], method: str = "ratio_of_sums") -> float:
    """Observational CTR over all periods, with no independence screen.

    ``ratio_of_sums`` (default) is total referred visits over total focal
    visits; ``mean_of_ratios`` averages per-period CTRs over periods with
    focal visits.
    """
    sx = math.fsum(float(pp.x_window.sum()) for pp in periods)
    sy = math.fsum(float(pp.y_r_window.sum()) for pp in periods)
    if sx <= 0:
        raise ValueError("total focal visits is zero; naive CTR undefined")
    if method == "ratio_of_sums":
        return sy / sx
    if method == "mean_of_ratios":
        ratios = [float(pp.y_r_window.sum()) / float(pp.x_window.sum())
                  for pp in periods if pp.x_window.sum() > 0]
        return math.fsum(ratios) / len(ratios)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class GroupRow:
    group: str
    n_instances: int
    n_focals: int
    estimate: EffectEstimate
    naive_ctr: float


def group_breakdown(
    instances: Sequence[SplitDoorInstance],
    focal_group_map: Mapping[str, str],
    periods: Sequence[PairPeriod] | None = None,
) -> list[GroupRow]:
    """Per-group causal and naive CTR, largest groups first.

    The naive CTR of a group is computed over all ``periods`` whose focal
    product belongs to the group, screened or not, like the overall naive
    baseline; without ``periods`` it falls back to the accepted instances'
    own windows.
    """
    by_group: dict[str, list[SplitDoorInstance]] = defaultdict(list)
    for inst in instances:
        by_group[focal_group_map.get(inst.pair_period.focal_id) or UNKNOWN_GROUP].append(inst)
    by_group_periods: dict[str, list[PairPeriod]] = defaultdict(list)
    for pp in periods or ():
        by_group_periods[focal_group_map.get(pp.focal_id) or UNKNOWN_GROUP].append(pp)
    rows = []
    for g, insts in by_group.items():
        focals = {i.pair_period.focal_id for i in insts}
        if periods is not None:
            pool = by_group_periods[g]
        else:
            pool = [i.pair_period for i in insts]
        try:
            naive = naive_ctr(pool)
        except ValueError:
            naive = float("nan")
        rows.append(GroupRow(g, len(insts), len(focals), mean_effect(aggregate_focal(insts)), naive))
    rows.sort(key=lambda r: (-r.n_instances, r.group))
    return rows


def write_groups_csv(rows: Sequence[GroupRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(GROUPS_HEADER)
        for r in rows:
            w.writerow([r.group, r.n_instances, r.n_focals, repr(r.estimate.rho_hat), repr(r.naive_ctr)])
