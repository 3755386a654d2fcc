"""Command-line surface: data ingestion, estimation, testing and simulation.

Exit codes: 0 success, 2 usage or input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .divergence import divergence_by_name
from .estimator import (
    EstimationError,
    asymptotic_covariance,
    confidence_stat,
    fit_divergence,
    fit_lmoment_method_gpd,
    fit_mle_gpd,
    fit_moment_method_gpd,
)
from .lmoments import SortedSample, lmoment_ratios, sample_lmoments_u, sample_lmoments_v
from .models import ParametricFamily, model_by_name
from .poly import OrderLimitError
from .sim import ScenarioConfig, run_scenario

USAGE_ERROR = 2
NUMERIC_ERROR = 3


class UsageError(Exception):
    pass


def read_column(path: str, col: int = 0) -> np.ndarray:
    """Numeric column from a CSV file; a non-numeric first row is a header."""
    rows = []
    bad_lines = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for lineno, row in enumerate(reader, start=1):
                if not row or all(not c.strip() for c in row):
                    continue
                if col >= len(row):
                    bad_lines.append(lineno)
                    continue
                cell = row[col].strip()
                try:
                    value = float(cell)
                except ValueError:
                    if lineno == 1 and not rows:
                        continue   # header
                    bad_lines.append(lineno)
                    continue
                if not np.isfinite(value):
                    bad_lines.append(lineno)
                    continue
                rows.append(value)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}")
    if bad_lines:
        raise UsageError(
            f"non-numeric or non-finite entries on lines {bad_lines} of {path}"
        )
    if len(rows) < 2:
        raise UsageError(f"{path} holds fewer than two usable values")
    return np.array(rows)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def cmd_lmoments(args) -> int:
    data = read_column(args.input, args.col)
    sample = SortedSample(data)
    if args.max_order < 1:
        raise UsageError("--max-order must be >= 1")
    lv = sample_lmoments_v(sample, args.max_order)
    lu = sample_lmoments_u(sample, min(args.max_order, sample.n))
    payload = {
        "n": sample.n,
        "v_statistic": [float(v) for v in lv.values],
        "u_statistic": [float(v) for v in lu.values],
    }
    if args.max_order >= 3 and lv[2] != 0:
        payload["ratios"] = lmoment_ratios(lv)
    if args.json:
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        print("order  l_r(V)      l_r(U)")
        for r in range(1, args.max_order + 1):
            u = _fmt(lu.values[r - 1]) if r <= lu.max_order else "-"
            print(f"{r:>5}  {_fmt(lv.values[r - 1]):>10}  {u:>10}")
        for key, val in payload.get("ratios", {}).items():
            print(f"{key} = {_fmt(val)}")
    return 0


def _fit_sample(sample: SortedSample, args):
    if args.method != "divergence":
        fitter = {
            "lmom": fit_lmoment_method_gpd,
            "moment": fit_moment_method_gpd,
            "mle": fit_mle_gpd,
        }[args.method]
        sigma, nu = fitter(sample)
        from .estimator import FitReport

        return FitReport(
            theta=np.array([sigma, nu]), xi=None, criterion=float("nan"),
            method=args.method, param_names=("sigma", "nu"),
        ), model_by_name("gpd-l234")
    model = model_by_name(args.model)
    divergence = divergence_by_name(args.div)
    return fit_divergence(sample, model, divergence), model


def _attach_asymptotics(report, model, sample):
    plugin = ParametricFamily("gpd", float(report.theta[0]),
                              min(float(report.theta[1]), 0.999999))
    cov = asymptotic_covariance(report.theta, model, plugin)
    n = sample.n
    report.cov_theta = cov.cov_theta / n
    report.cov_xi = cov.cov_xi / n
    if report.xi is not None:
        stat = confidence_stat(report.xi, cov.p, cov.sigma, n)
        report.s_n = stat.s_n
        report.df = stat.df
        report.p_value = stat.p_value
        report.diagnostics["rank_adjusted_df"] = stat.rank_adjusted
    return report


def cmd_fit(args) -> int:
    data = read_column(args.input, args.col)
    sample = SortedSample(data)
    report, model = _fit_sample(sample, args)
    if args.asymptotics and model.name == "gpd-l234":
        report = _attach_asymptotics(report, model, sample)
    payload = report.to_dict()
    if args.json:
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        print(f"method    {report.method}")
        for name, value in zip(report.param_names, report.theta):
            print(f"{name:<9} {_fmt(value)}")
        if np.isfinite(report.criterion):
            print(f"criterion {_fmt(report.criterion)}")
        if report.s_n is not None:
            print(f"S_n       {_fmt(report.s_n)}  (df={report.df}, "
                  f"p={_fmt(report.p_value)})")
    return 0


def cmd_test(args) -> int:
    data = read_column(args.input, args.col)
    sample = SortedSample(data)
    report, model = _fit_sample(sample, args)
    if report.xi is None:
        raise UsageError("the confidence statistic needs a divergence fit")
    report = _attach_asymptotics(report, model, sample)
    payload = {
        "s_n": report.s_n,
        "df": report.df,
        "p_value": report.p_value,
        "rank_adjusted_df": report.diagnostics.get("rank_adjusted_df", False),
    }
    if args.json:
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        print(f"S_n = {_fmt(report.s_n)}  df = {report.df}  "
              f"p = {_fmt(report.p_value)}")
    return 0


_SIM_KEYS = {
    "scenario", "n", "replicates", "seed", "estimators", "family", "sigma",
    "nu", "contamination", "outlier", "output_dir", "jobs",
}


def cmd_simulate(args) -> int:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot parse config {args.config}: {exc}")
    unknown = set(raw) - _SIM_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    if "scenario" not in raw:
        raise UsageError("config must name a scenario (1..4)")
    config = ScenarioConfig.preset(
        int(raw["scenario"]),
        n=int(raw.get("n", 100)),
        replicates=int(raw.get("replicates", 500)),
        seed=int(raw.get("seed", 0)),
        estimators=tuple(raw.get("estimators", ["chi2", "klm", "lmom", "moment", "mle"])),
    )
    for key in ("family", "sigma", "nu", "contamination", "outlier"):
        if key in raw:
            config = ScenarioConfig(**{**config.__dict__, key: raw[key]})
    out_dir = raw.get("output_dir", args.output or ".")
    os.makedirs(out_dir, exist_ok=True)
    summary = run_scenario(config, n_jobs=int(raw.get("jobs", args.jobs)))

    csv_path = os.path.join(out_dir, "replicates.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["replicate", "estimator", "sigma", "nu", "l1", "error"]
        )
        writer.writeheader()
        writer.writerows(summary.records)

    json_path = os.path.join(out_dir, "summary.json")
    with open(json_path, "w") as fh:
        json.dump(summary.to_dict(), fh, indent=2)
        fh.write("\n")

    _write_plot_data(summary, out_dir)
    print(f"wrote {csv_path}, {json_path} and plot data to {out_dir}")
    return 0


def _write_plot_data(summary, out_dir) -> None:
    """Density curves of each estimator's mean fit over the true-law range."""
    truth = summary.config.true_family
    lo = truth.quantile(0.001)
    hi = truth.quantile(0.999)
    x = np.linspace(lo, hi, 400)
    for est, block in summary.stats.items():
        if not block:
            continue
        fitted = ParametricFamily("gpd", block["sigma"].mean, block["nu"].mean)
        path = os.path.join(out_dir, f"density_{est.replace(':', '_')}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "fitted_density", "true_density"])
            for xi, fd, td in zip(x, fitted.density(x), truth.density(x)):
                writer.writerow([repr(float(xi)), repr(float(fd)), repr(float(td))])


def _parse_family(text: str) -> ParametricFamily:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError("density spec must be family:sigma:nu, e.g. gpd:3:0.7")
    try:
        return ParametricFamily(parts[0], float(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise UsageError(str(exc))


def cmd_dist(args) -> int:
    from .sim import l1_density_distance

    f1 = _parse_family(args.first)
    f2 = _parse_family(args.second)
    value = l1_density_distance(f1, f2)
    if args.json:
        json.dump({"l1_distance": value}, sys.stdout)
        sys.stdout.write("\n")
    else:
        print(_fmt(value))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmomdiv",
        description="Minimum-divergence estimation under L-moment constraints",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lmoments", help="sample L-moments of a CSV column")
    p.add_argument("input")
    p.add_argument("--max-order", type=int, default=4)
    p.add_argument("--col", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_lmoments)

    for name, fn in (("fit", cmd_fit), ("test", cmd_test)):
        p = sub.add_parser(name)
        p.add_argument("input")
        p.add_argument("--model", default="gpd-l234")
        p.add_argument("--div", default="chi2")
        p.add_argument("--method", default="divergence",
                       choices=["divergence", "lmom", "moment", "mle"])
        p.add_argument("--col", type=int, default=0)
        p.add_argument("--json", action="store_true")
        if name == "fit":
            p.add_argument("--asymptotics", action="store_true")
        p.set_defaults(func=fn)

    p = sub.add_parser("simulate", help="run a Monte Carlo scenario")
    p.add_argument("config")
    p.add_argument("--output")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dist", help="L1 distance between two densities")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_dist)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OrderLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (EstimationError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
