"""Command-line interface: ``rseas fit|adjust|select|outliers|simulate``.

Every option can also be set through an environment variable named
``RSEAS_<OPTION>`` (upper case, dashes as underscores), e.g.
``RSEAS_PERIOD=12`` or ``RSEAS_LOG=1``. Explicit flags take precedence.

Exit codes: 0 success, 2 input or usage error, 3 estimation failure,
4 inadmissible decomposition.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION, EXIT_INADMISSIBLE = 0, 2, 3, 4
ENV_PREFIX = "RSEAS_"


class InputError(ValueError):
    """Unreadable or inconsistent input."""


class CLIFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# --- series files ---------------------------------------------------------

_MONTH = re.compile(r"^(\d{4})-(\d{2})(?:-\d{2})?$")
_QUARTER = re.compile(r"^(\d{4})-?Q([1-4])$", re.IGNORECASE)


def _parse_date(text: str, line: int) -> Tuple[int, int, int]:
    """``(year, sub-period, periods per year)``."""
    m = _MONTH.match(text)
    if m and 1 <= int(m.group(2)) <= 12:
        return int(m.group(1)), int(m.group(2)), 12
    m = _QUARTER.match(text)
    if m:
        return int(m.group(1)), int(m.group(2)), 4
    raise InputError(f"line {line}: unrecognised date {text!r} (use YYYY-MM or YYYY-Qn)")


@dataclass(frozen=True)
class SeriesFile:
    values: np.ndarray
    dates: Optional[List[str]]
    period: Optional[int]
    start: Optional[Tuple[int, int]]


def read_series(text: str) -> SeriesFile:
    """Parse a CSV with a ``value`` column and an optional ``date`` column."""
    rows = [(i + 1, ln) for i, ln in enumerate(text.splitlines())
            if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise InputError("input is empty")
    header_line, header = rows[0]
    cols = [c.strip().lower() for c in next(csv.reader([header]))]
    if "value" not in cols:
        raise InputError(f"line {header_line}: header must contain a 'value' column")
    vi = cols.index("value")
    di = cols.index("date") if "date" in cols else None
    values, dates, parsed = [], [], []
    for line, raw in rows[1:]:
        cells = next(csv.reader([raw]))
        if len(cells) != len(cols):
            raise InputError(f"line {line}: expected {len(cols)} fields, found {len(cells)}")
        try:
            v = float(cells[vi])
        except ValueError:
            raise InputError(f"line {line}: value {cells[vi]!r} is not a number") from None
        if not np.isfinite(v):
            raise InputError(f"line {line}: value must be finite")
        values.append(v)
        if di is not None:
            d = cells[di].strip()
            y, sub, per = _parse_date(d, line)
            if parsed:
                py, psub, pper = parsed[-1]
                if per != pper:
                    raise InputError(f"line {line}: mixed date frequencies")
                expected = (py + psub // per, psub % per + 1)
                if (y, sub) != expected:
                    raise InputError(f"line {line}: date {d} does not follow the previous date without a gap")
            parsed.append((y, sub, per))
            dates.append(d)
    if not values:
        raise InputError("no data rows")
    if parsed:
        return SeriesFile(np.array(values), dates, parsed[0][2], parsed[0][:2])
    return SeriesFile(np.array(values), None, None, None)


def load_series(path: str, period: Optional[int], log: bool):
    from .series import SeriesError, TimeSeries, log_transform

    try:
        with open(path, encoding="utf-8") as fh:
            sf = read_series(fh.read())
    except OSError as exc:
        raise CLIFailure(EXIT_INPUT, f"cannot read {path}: {exc.strerror}") from exc
    except InputError as exc:
        raise CLIFailure(EXIT_INPUT, f"{path}: {exc}") from exc
    if sf.period is not None and period is not None and period != sf.period:
        raise CLIFailure(EXIT_INPUT, f"--period {period} contradicts the date frequency ({sf.period})")
    s = period or sf.period
    if s is None:
        raise CLIFailure(EXIT_INPUT, "no dates in input; --period is required")
    try:
        ts = TimeSeries(sf.values, s, sf.start)
        if log:
            ts = log_transform(ts)
    except SeriesError as exc:
        raise CLIFailure(EXIT_INPUT, str(exc)) from exc
    return ts, sf.dates


# --- helpers ----------------------------------------------------------------

def _env(name: str, default):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"), default)


def _env_flag(name: str) -> bool:
    return str(_env(name, "")).strip().lower() in ("1", "true", "yes", "on")


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _num(x):
    return None if x is None else float(x)


def _heavy_dict(spec):
    return {"irregular": spec.irregular, "nu": _num(spec.nu), "rho": _num(spec.rho),
            "lambda": _num(spec.lam), "trend": spec.trend, "nu_trend": _num(spec.nu_trend)}


def _fit_dict(fit):
    p = fit.params
    return {
        "params": {"theta": p.theta, "Theta": p.Theta, "sigma2": p.sigma2},
        "heavy": _heavy_dict(fit.heavy),
        "loglik": fit.loglik,
        "loglik_mc_se": fit.loglik_mc_se,
        "n_obs": fit.n_obs,
        "n_params": fit.n_params,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "boundary": fit.boundary,
        "warnings": list(fit.warnings),
    }


def _decomp_dict(d):
    return {
        "admissible": d.admissible,
        "var_seasonal": d.var_seasonal,
        "var_trend": d.var_trend,
        "var_irregular": d.var_irregular,
        "seasonal_ma": [float(c) for c in d.seasonal_ma],
        "trend_ma": [float(c) for c in d.trend_ma],
    }


def _estimate(ts, model: str, draws: int, seed: int):
    from .airline import EstimationError, fit_gaussian
    from .heavy import ApproximationError, ImportanceSamplingError, fit_heavy

    try:
        g = fit_gaussian(ts)
        return g if model == "gaussian" else fit_heavy(ts, model, M=draws, seed=seed, start=g)
    except (EstimationError, ApproximationError, ImportanceSamplingError, ArithmeticError) as exc:
        raise CLIFailure(EXIT_ESTIMATION, f"estimation failed: {exc}") from exc


# --- commands ---------------------------------------------------------------

def cmd_fit(args) -> int:
    from .canonical import decompose

    ts, _ = load_series(args.input, args.period, args.log)
    fit = _estimate(ts, args.model, args.draws, args.seed)
    decomp = decompose(fit.params, ts.period)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "fit",
        "model": args.model,
        "period": ts.period,
        "logged": ts.logged,
        "draws": args.draws if args.model != "gaussian" else 0,
        "seed": args.seed,
        **_fit_dict(fit),
        "decomposition": _decomp_dict(decomp),
    }
    _emit(_json(report), args.out)
    if not decomp.admissible:
        print("error: fitted model has an inadmissible canonical decomposition", file=sys.stderr)
        return EXIT_INADMISSIBLE
    return EXIT_OK


def cmd_adjust(args) -> int:
    from .canonical import decompose
    from .heavy import extract_components_heavy
    from .selection import gaussian_components

    ts, dates = load_series(args.input, args.period, args.log)
    fit = _estimate(ts, args.model, args.draws, args.seed)
    if not decompose(fit.params, ts.period).admissible:
        raise CLIFailure(EXIT_INADMISSIBLE, "fitted model has an inadmissible canonical decomposition")
    if fit.heavy.is_gaussian:
        comp = gaussian_components(ts, fit)
    else:
        comp = extract_components_heavy(ts, fit, args.draws, args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["value", "seasonal", "trend", "irregular", "adjusted"]
    w.writerow((["date"] if dates else []) + head)
    adjusted = comp.seasonally_adjusted
    for i in range(ts.n):
        row = [repr(float(v)) for v in (comp.observed[i], comp.seasonal[i], comp.trend[i],
                                        comp.irregular[i], adjusted[i])]
        w.writerow(([dates[i]] if dates else []) + row)
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def _selection_dict(report):
    rows = []
    for r in report.rows:
        c = r.criteria
        rows.append({
            "model": r.label,
            "length": report.length,
            "df": _num(r.df),
            "loglik": c.loglik,
            "loglik_mc_se": r.fit.loglik_mc_se,
            "k": c.k,
            "aic": c.aic,
            "aicc": c.aicc,
            "bic": c.bic,
            "seas_mean_abs_diff": None if r.stability is None else r.stability.mean_abs_diff,
            "seas_rms_diff": None if r.stability is None else r.stability.rms_diff,
            "params": _fit_dict(r.fit)["params"],
        })
    k = report.kurtosis
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "select",
        "rows": rows,
        "kurtosis": {"z_n": k.z_n, "scaled": k.scaled, "n": k.n, "p_value": k.p_value,
                     "alpha": k.alpha, "critical_value": k.critical_value, "reject_gaussian": k.reject_gaussian},
        "winners": report.winners,
        "recommendation": report.recommendation,
        "withheld": report.withheld,
        "notes": list(report.notes),
    }


def cmd_select(args) -> int:
    from .airline import EstimationError
    from .canonical import InadmissibleError
    from .heavy import ApproximationError, ImportanceSamplingError
    from .selection import format_table, select_model

    ts, _ = load_series(args.input, args.period, args.log)
    if args.withhold is not None and (args.withhold < 0 or args.withhold > ts.n - 3 * ts.period):
        raise CLIFailure(EXIT_INPUT, f"--withhold must lie in [0, n - 3*period] = [0, {ts.n - 3 * ts.period}]")
    try:
        report = select_model(ts, alpha=args.alpha, withhold=args.withhold, M=args.draws, seed=args.seed)
    except InadmissibleError as exc:
        raise CLIFailure(EXIT_INADMISSIBLE, str(exc)) from exc
    except (EstimationError, ApproximationError, ImportanceSamplingError, ArithmeticError) as exc:
        raise CLIFailure(EXIT_ESTIMATION, f"estimation failed: {exc}") from exc
    text = _json(_selection_dict(report)) if args.format == "json" else format_table(report, args.name) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_outliers(args) -> int:
    from .airline import EstimationError
    from .outliers import OutlierDetectionError, detect_outliers

    ts, dates = load_series(args.input, args.period, args.log)
    try:
        found, fit = detect_outliers(ts, args.critical)
    except (EstimationError, OutlierDetectionError, ArithmeticError) as exc:
        raise CLIFailure(EXIT_ESTIMATION, f"outlier detection failed: {exc}") from exc
    if args.format == "json":
        text = _json({
            "schema_version": SCHEMA_VERSION,
            "command": "outliers",
            "critical_value": found.critical_value,
            "outliers": [{"index": o.index, "date": dates[o.index] if dates else None, "kind": o.kind,
                          "coefficient": o.coefficient, "t_stat": o.t_stat} for o in found],
            **_fit_dict(fit),
        })
    else:
        lines = [f"critical value {found.critical_value:g}; {len(found)} outlier(s)",
                 "index,date,kind,coefficient,t_stat"]
        for o in found:
            lines.append(f"{o.index},{dates[o.index] if dates else ''},{o.kind},{o.coefficient:.6g},{o.t_stat:.3f}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .simulate import ExperimentConfig, experiment_aic, experiment_kurtosis, kurtosis_table

    if args.reps < 1 or args.n < 4:
        raise CLIFailure(EXIT_INPUT, "--reps must be >= 1 and --n >= 4")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if args.experiment == "kurtosis":
        summaries = experiment_kurtosis(ExperimentConfig(replications=args.reps, n=args.n, seed=args.seed))
        w.writerow(["family", "kind", "key", "value"])
        w.writerows(kurtosis_table(summaries))
    else:
        if args.n < 3 * 12:
            raise CLIFailure(EXIT_INPUT, "--n must be at least 36 for the monthly airline study")
        res = experiment_aic(ExperimentConfig(replications=args.reps, n=args.n, seed=args.seed,
                                              outlier_count=args.outliers, draws=args.draws))
        w.writerow(["replication", "aic_gaussian_minus_t", "choice"])
        for i, d in enumerate(res.differences):
            w.writerow([i, f"{d:.8f}", "t" if d > 0 else "gaussian"])
        w.writerow(["# failures", res.failures, ""])
        w.writerow(["# fraction_t", f"{res.fraction_t:.4f}", ""])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rseas", description="Airline-model seasonal adjustment with heavy-tailed noise.")
    sub = p.add_subparsers(dest="command", required=True)

    def series_opts(sp):
        sp.add_argument("--input", default=_env("input", None), required=_env("input", None) is None,
                        help="CSV with a 'value' column and optional 'date' column")
        sp.add_argument("--period", type=int, default=_env("period", None),
                        help="seasonal period (inferred from dates when present)")
        sp.add_argument("--log", action="store_true", default=_env_flag("log"), help="model the natural log")

    def mc_opts(sp):
        sp.add_argument("--draws", type=int, default=_env("draws", 250), help="importance-sampling draws (even)")
        sp.add_argument("--seed", type=int, default=_env("seed", 0))

    def out_opt(sp):
        sp.add_argument("--out", default=_env("out", None), help="output file (default stdout)")

    models = ("gaussian", "t", "mixture")
    sp = sub.add_parser("fit", help="estimate a model and write a JSON report")
    series_opts(sp)
    sp.add_argument("--model", choices=models, default=_env("model", "gaussian"))
    mc_opts(sp)
    out_opt(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("adjust", help="write seasonal, trend, irregular and adjusted series")
    series_opts(sp)
    sp.add_argument("--model", choices=models, default=_env("model", "gaussian"))
    mc_opts(sp)
    out_opt(sp)
    sp.set_defaults(func=cmd_adjust)

    sp = sub.add_parser("select", help="compare Gaussian and t models")
    series_opts(sp)
    sp.add_argument("--alpha", type=float, default=_env("alpha", 0.05))
    sp.add_argument("--withhold", type=int, default=_env("withhold", None),
                    help="observations withheld for the stability diagnostic (default: one period)")
    sp.add_argument("--format", choices=("table", "json"), default=_env("format", "table"))
    sp.add_argument("--name", default=_env("name", ""), help="series label for the table")
    mc_opts(sp)
    out_opt(sp)
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("outliers", help="detect additive outliers and level shifts")
    series_opts(sp)
    sp.add_argument("--critical", type=float, default=_env("critical", None),
                    help="critical |t| (default 3.5 for n <= 200, else 4.0)")
    sp.add_argument("--format", choices=("csv", "json"), default=_env("format", "csv"))
    out_opt(sp)
    sp.set_defaults(func=cmd_outliers)

    sp = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    sp.add_argument("--experiment", choices=("kurtosis", "aic"), default=_env("experiment", None),
                    required=_env("experiment", None) is None)
    sp.add_argument("--reps", type=int, default=_env("reps", 10_000))
    sp.add_argument("--n", type=int, default=_env("n", 150))
    sp.add_argument("--outliers", type=int, default=_env("outliers", 0), help="outliers per series (aic)")
    mc_opts(sp)
    out_opt(sp)
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CLIFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
