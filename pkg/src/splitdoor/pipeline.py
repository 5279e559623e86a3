"""End-to-end run: ingest, filter, slice, screen, estimate, bound the error.

Outputs land in ``RunConfig.out_dir``::

    report.json              every headline number plus config echo
    instances.csv            accepted instances at the main alpha
    pvalues.csv              one row per sliced period (status, p-value, sums)
    pvalue_histogram.csv     histogram behind the Nettleton estimate
    groups.csv               per-group causal vs naive CTR
    alpha_sweep.csv          W, phi and interval per alpha
    sensitivity_surface.csv  only when kappas are configured

``report.json`` keeps anything that legitimately varies between identical
runs (timing, thread count, output path) under ``run_metadata``.
"""
from __future__ import annotations

import contextlib
import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .data import (
    DEFAULT_MIN_PEAK,
    DEFAULT_TAU,
    DailyPanel,
    DataError,
    PairPeriod,
    apply_popularity_filter,
    filter_constant_direct,
    is_constant,
    load_panel,
    slice_periods,
)
from .discovery import (
    CONSTANT_YD,
    DEFAULT_ALPHA,
    TestedPeriods,
    period_status,
    screen_periods,
    threshold,
    write_instances_csv,
)
from .estimation import aggregate_focal, group_breakdown, mean_effect, naive_ctr, write_groups_csv
from .independence import DEFAULT_RESAMPLES
from .multiplicity import (
    DEFAULT_BINS,
    DEFAULT_LAMBDA,
    DEFAULT_Z,
    IntervalMethod,
    assess,
    effect_interval,
    write_histogram_csv,
)
from .sensitivity import SensitivityConfig, sensitivity_surface, write_surface_csv

logger = logging.getLogger(__name__)

SWEEP_HEADER = ("alpha", "W", "unique_focals", "N", "phi", "phi_prime", "rho_hat", "sigma_hat", "lower", "upper")
PVALUES_HEADER = ("focal_id", "target_id", "period_index", "status", "statistic", "p_value", "seed", "sum_x", "sum_y_r")


class PipelineError(RuntimeError):
    """A stage failed; ``stage`` names it and ``data_error`` marks bad input."""

    def __init__(self, stage: str, message: str, data_error: bool = False):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.message = message
        self.data_error = data_error


@dataclass
class RunConfig:
    input: str = ""
    format: str = "panel"
    tau: int = DEFAULT_TAU
    alpha: float = DEFAULT_ALPHA
    alphas: tuple = ()
    resamples: int = DEFAULT_RESAMPLES
    seed: int = 0
    min_peak: float = DEFAULT_MIN_PEAK
    pi_estimator: str = "nettleton"
    bins: int = DEFAULT_BINS
    lam: float = DEFAULT_LAMBDA
    z: float = DEFAULT_Z
    interval_method: str = "topk_exact"
    kappas: tuple = ()
    c1_grid: tuple = (-1.0, -0.5, 0.0, 0.5, 1.0)
    c2_grid: tuple = (-1.0, -0.5, 0.0, 0.5, 1.0)
    sensitivity_standardize: bool = True
    sensitivity_estimator: str = "ratio"
    out_dir: str = "splitdoor_out"
    threads: int = 1

    def validate(self) -> None:
        if self.format not in ("events", "panel"):
            raise ValueError(f"format must be 'events' or 'panel', got {self.format!r}")
        for a in (self.alpha, *self.alphas):
            if not 0 < a < 1:
                raise ValueError(f"alpha values must lie in (0, 1), got {a}")
        if self.resamples < 1:
            raise ValueError("resamples must be >= 1")
        if self.pi_estimator not in ("nettleton", "storey"):
            raise ValueError(f"unknown pi estimator {self.pi_estimator!r}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def echo(self) -> dict:
        d = asdict(self)
        for k in ("out_dir", "threads"):
            d.pop(k)
        return d


@dataclass
class PipelineReport:
    data: dict
    tested: TestedPeriods | None = field(default=None, repr=False)

    def __getitem__(self, key):
        return self.data[key]


def _clean(v):
    """Floats that JSON cannot carry (nan/inf) become None."""
    if isinstance(v, float) and (v != v or v in (float("inf"), float("-inf"))):
        return None
    return v


def sweep_row(tested: TestedPeriods, alpha: float, cfg: RunConfig) -> dict:
    """Numbers for one alpha, computed from the shared p-values."""
    run = threshold(tested, alpha)
    row = {"alpha": float(alpha), "W": run.W, "unique_focals": run.unique_focals,
           "N": 0, "phi": None, "phi_prime": None, "rho_hat": None,
           "sigma_hat": None, "lower": None, "upper": None}
    if run.W == 0:
        return row
    focals = aggregate_focal(run.instances)
    est = mean_effect(focals)
    mult = assess(run.all_p_values, alpha, run.W, len(focals),
                  estimator=cfg.pi_estimator, B=cfg.bins, lam=cfg.lam)
    interval = effect_interval([f.rho_i_tau for f in focals], min(1.0, mult.phi_prime),
                               z=cfg.z, method=IntervalMethod(cfg.interval_method))
    row.update(N=est.N, phi=mult.phi, phi_prime=mult.phi_prime, rho_hat=est.rho_hat,
               sigma_hat=est.sigma_hat, lower=interval.lower, upper=interval.upper)
    return row


def alpha_sweep(tested: TestedPeriods, alphas: Sequence[float], cfg: RunConfig) -> list[dict]:
    """Re-threshold one set of p-values at each alpha (tests run once)."""
    if len(alphas) < 2:
        raise ValueError("alpha sweep needs at least two alpha values")
    return [sweep_row(tested, a, cfg) for a in sorted(alphas)]


def write_sweep_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow(["" if r[k] is None else repr(r[k]) if isinstance(r[k], float) else r[k]
                        for k in SWEEP_HEADER])


def write_pvalues_csv(periods: Sequence[PairPeriod], tested: TestedPeriods, path) -> None:
    results = {r.key: r for r in tested.results}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(PVALUES_HEADER)
        for pp in sorted(periods, key=lambda p: p.key):
            res = results.get(pp.key)
            status = "tested" if res else period_status(pp)
            if res is None and is_constant(pp.y_d_window):
                status = CONSTANT_YD
            w.writerow([pp.focal_id, pp.target_id, pp.period_index, status,
                        repr(res.statistic) if res else "", repr(res.p_value) if res else "",
                        res.seed if res else "",
                        repr(float(pp.x_window.sum())), repr(float(pp.y_r_window.sum()))])


@contextlib.contextmanager
def _stage(name: str, timings: dict):
    t0 = time.perf_counter()
    try:
        yield
    except PipelineError:
        raise
    except DataError as exc:
        raise PipelineError(name, str(exc), data_error=True) from exc
    except (ValueError, OSError) as exc:
        raise PipelineError(name, str(exc), data_error=True) from exc
    finally:
        timings[name] = time.perf_counter() - t0


def _write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_clean)
        fh.write("\n")


def run_pipeline(cfg: RunConfig, panel: DailyPanel | None = None) -> PipelineReport:
    """Full recipe; on failure ``report.json`` is written with status "incomplete".

    ``panel`` skips reading ``cfg.input`` and analyses the given panel instead.
    """
    out = Path(cfg.out_dir)
    timings: dict[str, float] = {}
    meta = {"version": __version__, "threads": cfg.threads, "out_dir": str(out), "timing": timings}
    try:
        with _stage("config", timings):
            cfg.validate()
            out.mkdir(parents=True, exist_ok=True)
        return _run(cfg, out, timings, meta, panel)
    except PipelineError as exc:
        with contextlib.suppress(OSError):
            out.mkdir(parents=True, exist_ok=True)
            _write_json({"status": "incomplete", "failed_stage": exc.stage, "error": exc.message,
                         "config": cfg.echo(), "run_metadata": meta}, out / "report.json")
        raise


def _run(cfg: RunConfig, out: Path, timings: dict, meta: dict, panel: DailyPanel | None) -> PipelineReport:
    counts: dict = {}
    with _stage("ingest", timings):
        if panel is None:
            panel = load_panel(cfg.input, cfg.format)
        counts["pairs_ingested"] = panel.n_pairs
        counts["days"] = panel.n_days
    with _stage("popularity_filter", timings):
        panel = apply_popularity_filter(panel, cfg.min_peak)
        counts["pairs_after_popularity"] = panel.n_pairs
        if panel.n_pairs == 0:
            raise DataError("no testable periods: popularity filter removed every pair")
    with _stage("slice", timings):
        sliced = slice_periods(panel, cfg.tau)
        counts["periods_sliced"] = len(sliced)
    with _stage("constant_direct_filter", timings):
        periods = filter_constant_direct(sliced)
        counts["constant_y_d_removed"] = len(sliced) - len(periods)
        if not periods:
            raise DataError("no testable periods")
    with _stage("discover", timings):
        tested = screen_periods(periods, R=cfg.resamples, seed=cfg.seed, threads=cfg.threads)
        run = threshold(tested, cfg.alpha)
        counts["excluded"] = dict(tested.excluded)
        counts["m"] = run.m
        counts["W"] = run.W
        counts["unique_focals"] = run.unique_focals
        write_pvalues_csv(sliced, tested, out / "pvalues.csv")
        write_histogram_csv(run.all_p_values, out / "pvalue_histogram.csv", cfg.bins)
        write_instances_csv(run.instances, out / "instances.csv")
        if run.W == 0:
            raise DataError(f"no split-door instances at alpha={cfg.alpha}")
    with _stage("estimate", timings):
        focals = aggregate_focal(run.instances)
        est = mean_effect(focals)
        naive = naive_ctr(sliced)
        naive_mor = naive_ctr(sliced, method="mean_of_ratios")
        weighted = mean_effect(focals, weighted=True).rho_hat
        groups = group_breakdown(run.instances, panel.focal_groups, sliced)
        write_groups_csv(groups, out / "groups.csv")
        counts["N"] = est.N
    with _stage("multiplicity", timings):
        mult = assess(run.all_p_values, cfg.alpha, run.W, est.N,
                      estimator=cfg.pi_estimator, B=cfg.bins, lam=cfg.lam)
        interval = effect_interval([f.rho_i_tau for f in focals], min(1.0, mult.phi_prime),
                                   z=cfg.z, method=IntervalMethod(cfg.interval_method))
    with _stage("alpha_sweep", timings):
        alphas = sorted(set(cfg.alphas) | {cfg.alpha}) if cfg.alphas else [cfg.alpha]
        sweep = [sweep_row(tested, a, cfg) for a in alphas]
        write_sweep_csv(sweep, out / "alpha_sweep.csv")
    sens = None
    if cfg.kappas:
        with _stage("sensitivity", timings):
            surfaces = [
                sensitivity_surface(run.instances,
                                    SensitivityConfig(cfg.c1_grid, cfg.c2_grid, k, cfg.seed,
                                                      cfg.sensitivity_standardize),
                                    estimator=cfg.sensitivity_estimator)
                for k in cfg.kappas
            ]
            write_surface_csv(surfaces, out / "sensitivity_surface.csv")
            sens = [{"kappa": s.cells[0].kappa, "estimator": s.estimator, "baseline": s.baseline,
                     "max_abs_deviation": max(abs(c.deviation) for c in s.cells)} for s in surfaces]

    data = {
        "status": "complete",
        "config": cfg.echo(),
        "counts": counts,
        "estimate": {
            "rho_hat": est.rho_hat,
            "sigma_hat": est.sigma_hat,
            "N": est.N,
            "naive_ctr": naive,
            "naive_ctr_mean_of_ratios": naive_mor,
            "rho_hat_traffic_weighted": weighted,
        },
        "interval": {
            "lower": interval.lower,
            "upper": interval.upper,
            "rho_maxsum": interval.rho_maxsum,
            "z": interval.z,
            "method": interval.method.value,
        },
        "multiplicity": asdict(mult),
        "groups": [
            {"group": g.group, "n_instances": g.n_instances, "n_focals": g.n_focals,
             "causal_ctr": g.estimate.rho_hat, "naive_ctr": _clean(g.naive_ctr)}
            for g in groups
        ],
        "alpha_sweep": sweep,
        "sensitivity": sens,
        "run_metadata": meta,
    }
    _write_json(data, out / "report.json")
    return PipelineReport(data, tested)


# ------------------------------------------------------------- config files


def parse_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, keys use dashes or underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected key = value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out
