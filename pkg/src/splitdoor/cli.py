"""Command-line entry point: ``splitdoor <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .data import DataError, write_panel_csv
from .discovery import run_to_dict, threshold
from .pipeline import PipelineError, RunConfig, parse_config_file, run_pipeline
from .synthgen import GeneratorParams, generate_panel, write_truth_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

logger = logging.getLogger("splitdoor")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(s: str) -> tuple:
    try:
        return tuple(float(v) for v in str(s).replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {s!r}")


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# flag name -> (RunConfig field, converter)
RUN_OPTIONS = {
    "input": ("input", str),
    "format": ("format", str),
    "tau": ("tau", int),
    "alpha": ("alpha", float),
    "alphas": ("alphas", _floats),
    "resamples": ("resamples", int),
    "seed": ("seed", int),
    "min_peak": ("min_peak", float),
    "pi_estimator": ("pi_estimator", str),
    "bins": ("bins", int),
    "lambda": ("lam", float),
    "lam": ("lam", float),
    "z": ("z", float),
    "interval_method": ("interval_method", str),
    "kappas": ("kappas", _floats),
    "c1_grid": ("c1_grid", _floats),
    "c2_grid": ("c2_grid", _floats),
    "standardize": ("sensitivity_standardize", _bool),
    "sensitivity_estimator": ("sensitivity_estimator", str),
    "out": ("out_dir", str),
    "threads": ("threads", int),
}


def _add_run_options(p: argparse.ArgumentParser) -> None:
    # defaults are None so a config file value survives unless a flag is given
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--input", help="event or panel CSV")
    p.add_argument("--format", choices=("events", "panel"), help="input format (default: panel)")
    p.add_argument("--tau", type=int, help="window length in days (default: 15)")
    p.add_argument("--alpha", type=float, help="significance level (default: 0.95)")
    p.add_argument("--resamples", type=int, help="null draws per test (default: 1000)")
    p.add_argument("--seed", type=int, help="base seed (default: 0)")
    p.add_argument("--min-peak", dest="min_peak", type=float, help="popularity threshold (default: 10)")
    p.add_argument("--pi-estimator", dest="pi_estimator", choices=("nettleton", "storey"),
                   help="null-fraction estimator (default: nettleton)")
    p.add_argument("--bins", type=int, help="histogram bins for Nettleton (default: 20)")
    p.add_argument("--lambda", dest="lambda", type=float, help="Storey lambda (default: 0.5)")
    p.add_argument("--z", type=float, help="interval critical value (default: 2.58)")
    p.add_argument("--interval-method", dest="interval_method", choices=("topk_exact", "mean_approx"))
    p.add_argument("--threads", type=int, help="worker threads for testing (default: 1)")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="splitdoor", description="Split-door causal effect estimation on daily panels.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sim = sub.add_parser("simulate", help="generate a synthetic panel with known effect")
    for f in fields(GeneratorParams):
        if f.name in ("groups", "group_rho"):
            continue
        flag = "--" + f.name.replace("_", "-")
        kind = type(f.default) if f.default is not None else str
        sim.add_argument(flag, dest=f.name, type=kind, default=None)
    sim.add_argument("--groups", type=lambda s: tuple(g for g in s.split(",") if g), default=None)
    sim.add_argument("--group-rho", dest="group_rho", type=_floats, default=None)
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("-v", "--verbose", action="store_true")

    for name, help_ in (
        ("discover", "screen periods; write instances.csv and pvalues.csv"),
        ("estimate", "full pipeline; write report.json and tables"),
        ("sweep", "full pipeline over several alpha values"),
        ("sensitivity", "full pipeline plus the hidden-confound surface"),
    ):
        p = sub.add_parser(name, help=help_)
        _add_run_options(p)
        if name == "sweep":
            p.add_argument("--alphas", type=_floats, help="comma-separated alpha list")
        if name == "sensitivity":
            p.add_argument("--kappas", type=_floats, help="comma-separated kappa list (default: 1,0.5)")
            p.add_argument("--c1-grid", dest="c1_grid", type=_floats)
            p.add_argument("--c2-grid", dest="c2_grid", type=_floats)
            p.add_argument("--raw", dest="standardize", action="store_const", const=False, default=None,
                           help="inject on raw counts (clipped at zero)")
            p.add_argument("--sensitivity-estimator", dest="sensitivity_estimator", choices=("ratio", "ols"))

    rep = sub.add_parser("report", help="print a summary of a report.json")
    rep.add_argument("--input", required=True, help="report.json or the directory holding it")
    rep.add_argument("-v", "--verbose", action="store_true")
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        try:
            entries = parse_config_file(args.config)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config: {exc}")
        for k, v in entries.items():
            if k not in RUN_OPTIONS:
                raise UsageError(f"unknown config key {k!r}")
            field_name, conv = RUN_OPTIONS[k]
            try:
                values[field_name] = conv(v)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {k!r}: {exc}")
    for k, (field_name, _) in RUN_OPTIONS.items():
        v = getattr(args, k, None)
        if v is not None:
            values[field_name] = v
    if args.command == "sensitivity" and "kappas" not in values:
        values["kappas"] = (1.0, 0.5)
    if args.command == "sweep" and len(values.get("alphas", ())) < 2:
        raise UsageError("sweep needs --alphas with at least two values")
    if not values.get("input"):
        raise UsageError("--input is required (flag or config file)")
    cfg = RunConfig(**values)
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc))
    return cfg


def _cmd_simulate(args) -> int:
    kw = {f.name: getattr(args, f.name) for f in fields(GeneratorParams)
          if getattr(args, f.name, None) is not None}
    try:
        params = GeneratorParams(**kw)
        params.validate()
    except ValueError as exc:
        raise UsageError(str(exc))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    panel, truth = generate_panel(params)
    write_panel_csv(panel, out / "panel.csv")
    write_truth_csv(truth, out / "truth.csv")
    with open(out / "simulate.json", "w", encoding="utf-8") as fh:
        json.dump({"params": truth.params, "floor_rate": truth.floor_rate,
                   "n_confounded": int(truth.confounded.sum())}, fh, indent=2)
    print(f"wrote {panel.n_pairs} pairs x {panel.n_days} days to {out / 'panel.csv'} "
          f"(floor rate {truth.floor_rate:.2e})")
    return EXIT_OK


def _cmd_discover(cfg: RunConfig) -> int:
    from .pipeline import _stage  # shared stage/error handling
    from .data import apply_popularity_filter, filter_constant_direct, load_panel, slice_periods
    from .discovery import screen_periods, write_instances_csv, write_run_json
    from .multiplicity import write_histogram_csv
    from .pipeline import write_pvalues_csv

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings: dict = {}
    with _stage("ingest", timings):
        panel = apply_popularity_filter(load_panel(cfg.input, cfg.format), cfg.min_peak)
        if panel.n_pairs == 0:
            raise DataError("no testable periods: popularity filter removed every pair")
    with _stage("slice", timings):
        sliced = slice_periods(panel, cfg.tau)
        periods = filter_constant_direct(sliced)
    with _stage("discover", timings):
        tested = screen_periods(periods, R=cfg.resamples, seed=cfg.seed, threads=cfg.threads)
        run = threshold(tested, cfg.alpha)
    write_instances_csv(run.instances, out / "instances.csv")
    write_pvalues_csv(sliced, tested, out / "pvalues.csv")
    write_histogram_csv(run.all_p_values, out / "pvalue_histogram.csv", cfg.bins)
    doc = run_to_dict(run)
    doc["config"].update(cfg.echo())
    with open(out / "discovery.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    print(f"m={run.m} tested, W={run.W} accepted at alpha={run.alpha} "
          f"({run.unique_focals} unique focals); outputs in {out}")
    return EXIT_OK


def _fmt(v, spec=".4f"):
    return "-" if v is None else format(v, spec)


def _cmd_report(args) -> int:
    path = Path(args.input)
    if path.is_dir():
        path = path / "report.json"
    try:
        with open(path, encoding="utf-8") as fh:
            rep = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read report {path}: {exc}")
    if rep.get("status") != "complete":
        print(f"INCOMPLETE run: stage {rep.get('failed_stage')} failed: {rep.get('error')}")
        return EXIT_DATA
    c, e, i, mu = rep["counts"], rep["estimate"], rep["interval"], rep["multiplicity"]
    alpha = rep["config"]["alpha"]
    print(f"alpha = {alpha}   m = {c['m']}   W = {c['W']}   N = {c['N']}   unique focals = {c['unique_focals']}")
    print(f"causal CTR rho_hat = {e['rho_hat']:.4f}  (sigma_hat {e['sigma_hat']:.4f})")
    print(f"interval ({i['method']}, z={i['z']}) = [{i['lower']:.4f}, {i['upper']:.4f}]")
    print(f"naive CTR = {e['naive_ctr']:.4f}  (mean of ratios {e['naive_ctr_mean_of_ratios']:.4f})")
    print(f"pi_dep = {mu['pi_dep']:.3f} ({mu['estimator']}; storey pi_indep {mu['pi_indep_storey']:.3f}, "
          f"nettleton pi_indep {mu['pi_indep_nettleton']:.3f})   phi = {_fmt(mu['phi'], '.3f')}")
    if rep.get("groups"):
        print("\ngroup                n_inst  n_focal  causal   naive")
        for g in rep["groups"]:
            print(f"{g['group'][:20]:20s} {g['n_instances']:6d}  {g['n_focals']:7d}  "
                  f"{g['causal_ctr']:.4f}  {_fmt(g['naive_ctr'])}")
    if len(rep.get("alpha_sweep", [])) > 1:
        print("\nalpha   W       phi     rho_hat  lower    upper")
        for r in rep["alpha_sweep"]:
            print(f"{r['alpha']:.3f}  {r['W']:6d}  {_fmt(r['phi'], '.3f'):6s}  {_fmt(r['rho_hat'])}   "
                  f"{_fmt(r['lower'])}   {_fmt(r['upper'])}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, or a usage error already printed
        return int(exc.code or 0)
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "report":
            return _cmd_report(args)
        cfg = make_config(args)
        if args.command == "discover":
            return _cmd_discover(cfg)
        report = run_pipeline(cfg)
        print(f"rho_hat = {report['estimate']['rho_hat']:.4f}, W = {report['counts']['W']}, "
              f"phi = {_fmt(report['multiplicity']['phi'], '.3f')}; outputs in {cfg.out_dir}")
        return EXIT_OK
    except UsageError as exc:
        print(f"splitdoor: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"splitdoor: {exc}", file=sys.stderr)
        return EXIT_DATA if exc.data_error else EXIT_INTERNAL
    except DataError as exc:
        print(f"splitdoor: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"splitdoor: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
