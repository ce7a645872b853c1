"""Command-line front end.

Subcommands::

    circtests fit       data.csv --scenario circ-lin --cv --out fit.csv
    circtests test      data.csv --scenario circ-circ --test equality --cv --seed 1
    circtests trace     data.csv --scenario circ-lin --test noeffect \\
                        --param-min 0.5 --param-max 15 --param-count 30 --out-csv trace.csv
    circtests simulate  study.json --seed 7 --out study.csv

Input files are CSV with a header naming ``predictor``, ``response`` and
optionally ``group``. Exit codes: 0 success, 2 usage error, 3 data error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .ancova import GroupedSample, ancova_test_circ_lin, ancova_test_circ_response
from .calibration import TestReport, smoothing_label
from .core import TWO_PI, KernelSpec
from .errors import (
    Chi2Unavailable,
    CircTestError,
    DuplicatePredictors,
    InvalidInput,
    TooFewObservations,
    ZeroDistance,
)
from .estimators import RegressionSample, cv_select, fit
from .noeffect import noeffect_test_circ_lin, noeffect_test_circ_response
from .simulation import ScenarioSpec, rejection_study, rows_to_csv, study_manifest

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

KINDS = {"circ-lin": ("circular", "linear"), "lin-circ": ("linear", "circular"), "circ-circ": ("circular", "circular")}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------------------
# input


@dataclass(frozen=True)
class Dataset:
    """Parsed input file; angles already in radians."""

    predictors: np.ndarray
    responses: np.ndarray
    groups: Optional[np.ndarray]
    scenario: str

    @property
    def kinds(self):
        return KINDS[self.scenario]

    def sample(self) -> RegressionSample:
        pk, rk = self.kinds
        return RegressionSample(self.predictors, self.responses, pk, rk)

    def grouped(self) -> GroupedSample:
        if self.groups is None:
            raise UsageError("this test needs a 'group' column in the input")
        pk, rk = self.kinds
        return GroupedSample.from_arrays(self.predictors, self.responses, self.groups, pk, rk)


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"line {line}: {column} value {text!r} is not a number") from None
    if not math.isfinite(v):
        raise DataError(f"line {line}: {column} value {text!r} is not finite")
    return v


def read_dataset(path: str, scenario: str, degrees: bool = False) -> Dataset:
    """Read ``predictor,response[,group]`` rows; group labels keep file order."""
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        header = [h.strip().lower() for h in header]
        for col in ("predictor", "response"):
            if col not in header:
                raise DataError(f"line 1: header lacks a {col!r} column")
        ix, iy = header.index("predictor"), header.index("response")
        ig = header.index("group") if "group" in header else None
        xs, ys, gs = [], [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"line {line}: expected {len(header)} fields, found {len(row)}")
            xs.append(_parse_float(row[ix].strip(), line, "predictor"))
            ys.append(_parse_float(row[iy].strip(), line, "response"))
            if ig is not None:
                label = row[ig].strip()
                if not label:
                    raise DataError(f"line {line}: empty group label")
                gs.append(label)
    if not xs:
        raise DataError(f"{path} has no data rows")
    x, y = np.array(xs), np.array(ys)
    pk, rk = KINDS[scenario]
    if degrees:
        if pk == "circular":
            x = np.deg2rad(x)
        if rk == "circular":
            y = np.deg2rad(y)
    return Dataset(x, y, None if ig is None else np.array(gs, dtype=object), scenario)


# ---------------------------------------------------------------------------
# output


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(v) -> str:
    return "" if v is None or not math.isfinite(v) else repr(float(v))


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _emit(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        atomic_write(path, text)


# ---------------------------------------------------------------------------
# shared pieces


def choose_param(sample: RegressionSample, param: Optional[float], use_cv: bool, cv_factor: float = 1.0):
    """Return ``(param, cv_score)``; the score is ``None`` for a fixed value."""
    if use_cv:
        res = cv_select(sample)
        return res.param * cv_factor, res.score
    return float(param), None


def run_named_test(
    data: Dataset,
    test: str,
    param: float,
    calibration: str,
    boot_reps: int = 500,
    seed: Optional[int] = None,
) -> TestReport:
    """Dispatch ``noeffect`` / ``equality`` / ``parallelism`` to the library."""
    circ_lin = data.scenario == "circ-lin"
    if calibration == "chi2" and not circ_lin:
        raise Chi2Unavailable("chi-square calibration needs a real response; use --calibration bootstrap")
    if calibration == "bootstrap" and seed is None:
        raise UsageError("--seed is required with bootstrap calibration")
    if test == "noeffect":
        sample = data.sample()
        if circ_lin:
            return noeffect_test_circ_lin(sample, param, calibration, boot_reps, seed)
        return noeffect_test_circ_response(sample, KernelSpec(sample.kernel_kind, param), boot_reps, seed)
    grouped = data.grouped()
    if circ_lin:
        return ancova_test_circ_lin(grouped, param, test, calibration, boot_reps, seed)
    kernel = KernelSpec(grouped.pooled().kernel_kind, param)
    return ancova_test_circ_response(grouped, kernel, test, boot_reps, seed)


def _default_calibration(args) -> str:
    if args.calibration is not None:
        return args.calibration
    return "chi2" if args.scenario == "circ-lin" else "bootstrap"


def _param_source(args, sample: RegressionSample):
    if (args.param is None) == (not args.cv):
        raise UsageError("give exactly one of --param or --cv")
    if args.param is not None and not (math.isfinite(args.param) and args.param >= 0):
        raise UsageError("--param must be a finite nonnegative number")
    return choose_param(sample, args.param, args.cv, args.cv_factor)


def _data_for_cv(data: Dataset, test: str) -> RegressionSample:
    # groups share one smoothing parameter, chosen on the pooled sample
    return data.sample() if test == "noeffect" else data.grouped().pooled()


# ---------------------------------------------------------------------------
# subcommands


def cmd_fit(args) -> int:
    if args.grid_points < 2:
        raise UsageError("--grid-points must be >= 2")
    data = read_dataset(args.input, args.scenario, args.degrees)
    sample = data.sample()
    param, score = _param_source(args, sample)
    pk, rk = data.kinds
    if pk == "circular":
        grid = np.arange(args.grid_points) * (TWO_PI / args.grid_points)
    else:
        grid = np.linspace(sample.predictors.min(), sample.predictors.max(), args.grid_points)
    fitted = fit(sample, param, grid)
    out_x = np.rad2deg(grid) if (args.degrees and pk == "circular") else grid
    out_y = np.rad2deg(fitted) if (args.degrees and rk == "circular") else fitted
    lines = ["eval_point,fitted"] + [f"{_num(a)},{_num(b)}" for a, b in zip(out_x, out_y)]
    atomic_write(args.out, "\n".join(lines) + "\n")
    sidecar = {
        "scenario": data.scenario,
        "method": "cv" if args.cv else "fixed",
        "smoothing": smoothing_label(pk, param),
        "cv_score": score,
        "cv_factor": args.cv_factor if args.cv else None,
        "units": "degrees" if args.degrees else "radians",
        "n": sample.n,
    }
    atomic_write(args.sidecar or str(Path(args.out).with_suffix(".json")), _dump(sidecar))
    return EXIT_OK


def cmd_test(args) -> int:
    calibration = _default_calibration(args)
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    data = read_dataset(args.input, args.scenario, args.degrees)
    if args.test != "noeffect" and data.groups is None:
        raise UsageError(f"--test {args.test} needs a 'group' column in the input")
    if calibration == "bootstrap" and args.seed is None:
        raise UsageError("--seed is required with bootstrap calibration")
    param, _ = _param_source(args, _data_for_cv(data, args.test))
    report = run_named_test(data, args.test, param, calibration, args.boot_reps, args.seed)
    _emit(args.out, _dump(report.to_dict(args.alpha)))
    return EXIT_OK


def trace_params(lo: float, hi: float, count: int) -> np.ndarray:
    if count < 2:
        raise UsageError("--param-count must be >= 2")
    if not (math.isfinite(lo) and math.isfinite(hi) and 0 <= lo < hi):
        raise UsageError("need 0 <= --param-min < --param-max")
    return np.linspace(lo, hi, count)


def trace_rows(data: Dataset, test: str, params, calibration: str, boot_reps: int, seed):
    """``(param, statistic, p_value)`` rows; failed points carry ``None``."""
    rows = []
    for p in params:
        try:
            r = run_named_test(data, test, float(p), calibration, boot_reps, seed)
            rows.append((float(p), r.statistic, r.p_value))
        except (CircTestError, ArithmeticError):
            rows.append((float(p), None, None))
    return rows


def trace_svg(rows, alpha: float, cv_param: Optional[float], xlabel: str, title: str) -> str:
    """Static line chart of p-value against the smoothing parameter."""
    W, H, L, R, T, B = 640, 400, 60, 20, 30, 50
    xs = [r[0] for r in rows]
    x0, x1 = min(xs), max(xs)

    def px(x):
        return L + (x - x0) / (x1 - x0) * (W - L - R)

    def py(p):
        return T + (1.0 - p) * (H - T - B)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{L}" y1="{py(0):.2f}" x2="{W - R}" y2="{py(0):.2f}" stroke="black"/>',
        f'<line x1="{L}" y1="{py(0):.2f}" x2="{L}" y2="{py(1):.2f}" stroke="black"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        out.append(f'<text x="{L - 6}" y="{py(tick) + 4:.2f}" text-anchor="end" font-size="11">{tick:g}</text>')
    for tick in np.linspace(x0, x1, 5):
        out.append(f'<text x="{px(tick):.2f}" y="{H - B + 16}" text-anchor="middle" font-size="11">{tick:.3g}</text>')
    out.append(f'<text x="{W / 2:.1f}" y="{H - 10}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(
        f'<text x="16" y="{H / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {H / 2:.1f})">p-value</text>'
    )
    out.append(
        f'<line x1="{L}" y1="{py(alpha):.2f}" x2="{W - R}" y2="{py(alpha):.2f}" '
        'stroke="grey" stroke-dasharray="6 4"/>'
    )
    if cv_param is not None and x0 <= cv_param <= x1:
        out.append(
            f'<line x1="{px(cv_param):.2f}" y1="{py(0):.2f}" x2="{px(cv_param):.2f}" y2="{py(1):.2f}" '
            'stroke="grey" stroke-dasharray="2 3"/>'
        )
    # one polyline per run of successful points
    run: list[str] = []
    for x, _, p in rows + [(None, None, None)]:
        if p is None:
            if len(run) > 1:
                out.append(f'<polyline fill="none" stroke="steelblue" stroke-width="2" points="{" ".join(run)}"/>')
            run = []
        else:
            run.append(f"{px(x):.2f},{py(p):.2f}")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_trace(args) -> int:
    calibration = _default_calibration(args)
    params = trace_params(args.param_min, args.param_max, args.param_count)
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    data = read_dataset(args.input, args.scenario, args.degrees)
    if args.test != "noeffect" and data.groups is None:
        raise UsageError(f"--test {args.test} needs a 'group' column in the input")
    if calibration == "bootstrap" and args.seed is None:
        raise UsageError("--seed is required with bootstrap calibration")
    if calibration == "chi2" and args.scenario != "circ-lin":
        raise Chi2Unavailable("chi-square calibration needs a real response; use --calibration bootstrap")
    rows = trace_rows(data, args.test, params, calibration, args.boot_reps, args.seed)
    lines = ["param,statistic,p_value"] + [f"{_num(p)},{_num(s)},{_num(pv)}" for p, s, pv in rows]
    atomic_write(args.out_csv, "\n".join(lines) + "\n")
    if args.out_svg:
        try:
            cv_param = cv_select(_data_for_cv(data, args.test)).param
        except CircTestError:
            cv_param = None
        kind = smoothing_label(data.kinds[0], 0.0)["kind"]
        atomic_write(args.out_svg, trace_svg(rows, args.alpha, cv_param, kind, f"{args.test} test trace"))
    return EXIT_OK


CONFIG_KEYS = {"specs", "workers"}


def load_study(path: str, default_seed: int):
    """Parse and validate a JSON study config before anything runs."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise DataError("config must be a JSON object with a 'specs' list")
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise DataError(f"unknown config keys: {sorted(unknown)}")
    raw = doc.get("specs", [])
    if not isinstance(raw, list):
        raise DataError("'specs' must be a list")
    specs = []
    for k, item in enumerate(raw):
        if not isinstance(item, dict):
            raise DataError(f"spec {k}: must be an object")
        item = dict(item)
        item.setdefault("seed", default_seed)
        try:
            specs.append(ScenarioSpec.from_dict(item))
        except (InvalidInput, TypeError) as exc:
            raise DataError(f"spec {k}: {exc}") from None
    workers = doc.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise DataError("'workers' must be a positive integer")
    return specs, workers


def cmd_simulate(args) -> int:
    specs, workers = load_study(args.config, args.seed)
    if args.workers is not None:
        workers = args.workers
    rows = [rejection_study(s, workers=workers) for s in specs]
    atomic_write(args.out, rows_to_csv(rows))
    manifest = args.manifest or str(Path(args.out).with_suffix(".manifest.json"))
    atomic_write(manifest, study_manifest(specs))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("input", help="CSV file with predictor,response[,group] columns")
    p.add_argument("--scenario", required=True, choices=sorted(KINDS))
    p.add_argument("--degrees", action="store_true", help="circular columns are in degrees")


def _add_smoothing(p: argparse.ArgumentParser):
    p.add_argument("--param", type=float, help="concentration (circular predictor) or bandwidth")
    p.add_argument("--cv", action="store_true", help="select the parameter by leave-one-out CV")
    p.add_argument("--cv-factor", type=float, default=1.0, help="multiply the CV choice (e.g. 0.125)")


def _add_testing(p: argparse.ArgumentParser):
    p.add_argument("--test", required=True, choices=["noeffect", "equality", "parallelism"])
    p.add_argument("--calibration", choices=["chi2", "bootstrap"],
                   help="default: chi2 for circ-lin, bootstrap otherwise")
    p.add_argument("--boot-reps", type=int, default=500)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, help="required for bootstrap calibration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="circtests", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="kernel regression fit on a uniform grid")
    _add_common(p)
    _add_smoothing(p)
    p.add_argument("--grid-points", type=int, default=200)
    p.add_argument("--out", required=True, help="CSV of (eval_point, fitted)")
    p.add_argument("--sidecar", help="JSON sidecar path (default: --out with .json)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("test", help="run one hypothesis test")
    _add_common(p)
    _add_smoothing(p)
    _add_testing(p)
    p.add_argument("--out", help="JSON report path (default: stdout)")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("trace", help="p-values over a range of smoothing parameters")
    _add_common(p)
    _add_testing(p)
    p.add_argument("--param-min", type=float, required=True)
    p.add_argument("--param-max", type=float, required=True)
    p.add_argument("--param-count", type=int, required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-svg")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("simulate", help="Monte Carlo rejection rates from a JSON study config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, required=True, help="seed for specs that do not set one")
    p.add_argument("--out", required=True, help="CSV of rejection rates")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_simulate)
    return parser


DATA_ERRORS = (DataError, InvalidInput, DuplicatePredictors, TooFewObservations, ZeroDistance)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, Chi2Unavailable) as exc:
        print(f"circtests: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"circtests: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CircTestError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"circtests: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
