"""Command-line entry point.

Subcommands: simulate-null, test, analyze, power, ingest. Exit codes: 0 done
(test decisions live in the payload), 1 usage error, 2 data error, 3 numerical
degeneracy. The null-table cache directory defaults to ``$RELEIG_CACHE_DIR``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import itertools
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .dgp import (
    POWER_CSV_COLUMNS,
    DgpConfig,
    distance_to_phase,
    run_power_study,
    write_power_csv,
)
from .fda import CurveSample, Grid, GridMismatchError, center
from .ingest import (
    CsvSchema,
    DataError,
    RawSeries,
    build_annual_curves,
    detrend_linear,
    load_csv,
    write_curve_file,
    write_long_csv,
    read_curve_file,
)
from .measure import NuMeasure
from .multiplicity import correct
from .nulldist import (
    DEFAULT_PATH_STEPS,
    DEFAULT_REPLICATES,
    MIN_REPLICATES,
    QuantileTable,
    cache_path,
    default_cache_dir,
    get_table,
)
from .selfnorm import RelevanceTestConfig, TestResult, test_eigenfunction, test_eigenfunctions, test_eigenvalue

REPORT_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE = 0, 1, 2, 3
CONFIG_SECTION = "releig"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _notice(msg: str):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- analysis


@dataclass
class AnalysisReport:
    stations: list[str]
    orders: list[int]
    deltas: list[float]
    config: dict
    pairs: list[dict] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)
    format_version: int = REPORT_VERSION

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "stations": self.stations,
            "orders": self.orders,
            "deltas": self.deltas,
            "config": self.config,
            "pairs": self.pairs,
            "failures": self.failures,
        }

    def p_value_matrix(self, j: int) -> dict[tuple[str, str], float]:
        return {(p["a"], p["b"]): p["results"][str(j)]["p_value"] for p in self.pairs}

    def csv_rows(self) -> list[list]:
        rows = []
        for p in self.pairs:
            corrected = p.get("correction")
            for k, j in enumerate(self.orders):
                r = p["results"][str(j)]
                flag = corrected["reject_flags"][k] if corrected else r["reject"]
                rows.append(
                    [p["a"], p["b"], j, self.deltas[k], r["d_hat"], r["v_hat"], r["w_hat"], r["p_value"],
                     r["reject"], flag, "*" if r["p_value"] < self.config["alpha"] else ""]
                )
        return rows


ANALYSIS_CSV_COLUMNS = (
    "station_a", "station_b", "order", "delta", "d_hat", "v_hat", "w_hat", "p_value",
    "reject", "corrected_reject", "marked",
)


def prepare_station(raw: RawSeries, basis_size: int, max_missing: int, grid: Grid) -> CurveSample:
    """Annual curves, linear detrending and centering for one station."""
    curves = build_annual_curves(raw, basis_size, max_missing, grid)
    return center(detrend_linear(curves).curves)


def run_analysis(
    samples: dict[str, CurveSample],
    orders: Sequence[int],
    deltas: Sequence[float],
    alpha: float,
    table: QuantileTable,
    correction: str = "none",
    failures: dict[str, str] | None = None,
    config: dict | None = None,
) -> AnalysisReport:
    """All pairwise relevance tests between stations, in input order."""
    names = list(samples)
    cfg = RelevanceTestConfig(j=max(orders), delta=deltas[0], alpha=alpha, nu=table.nu)
    report = AnalysisReport(
        stations=names,
        orders=list(orders),
        deltas=list(deltas),
        config={"alpha": alpha, "correction": correction, **(config or {})},
        failures=dict(failures or {}),
    )
    for a, b in itertools.combinations(names, 2):
        entry: dict = {"a": a, "b": b}
        try:
            results = test_eigenfunctions(samples[a], samples[b], orders, deltas, table, cfg)
        except (ValueError, np.linalg.LinAlgError) as exc:
            entry["error"] = str(exc)
            report.pairs.append(entry)
            continue
        entry["results"] = {str(j): r.to_dict() for j, r in zip(orders, results)}
        if correction != "none":
            entry["correction"] = correct([r.p_value for r in results], alpha, correction, orders).to_dict()
        report.pairs.append(entry)
    return report


# ---------------------------------------------------------------- helpers


def _nu(args) -> NuMeasure:
    return NuMeasure(lower=args.nu_lower)


def _table(args, announce: bool = True) -> QuantileTable:
    if args.R < MIN_REPLICATES:
        raise UsageError(f"R = {args.R} is below {MIN_REPLICATES}; tables used for decisions need more replicates")
    cache_dir = args.cache_dir or default_cache_dir()
    path = cache_path(cache_dir, _nu(args), args.L, args.R, args.seed)
    if announce and not path.exists():
        _notice(f"no cached null table at {path}; simulating (L={args.L}, R={args.R}, seed={args.seed})")
    table, _ = get_table(_nu(args), args.L, args.R, args.seed, cache_dir, args.workers)
    return table


def _effective(args) -> dict:
    out = {}
    for k, v in vars(args).items():
        if k in ("func",):
            continue
        out[k] = str(v) if isinstance(v, Path) else v
    return out


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o).__name__)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default)


def _schema(args) -> CsvSchema:
    return CsvSchema(
        value=args.value_col,
        date=args.date_col or None,
        year=args.year_col,
        month=args.month_col,
        day=args.day_col,
        doy=args.doy_col,
        station=args.station_col or None,
    )


def _load_stations(paths: Sequence[Path], schema: CsvSchema) -> dict[str, RawSeries]:
    out: dict[str, RawSeries] = {}
    for p in paths:
        for name, series in load_csv(p, schema).items():
            if name in out:
                raise DataError(f"station {name!r} appears in more than one file")
            out[name] = series
    return out


# ---------------------------------------------------------------- commands


def cmd_simulate_null(args) -> int:
    if args.R < MIN_REPLICATES:
        raise UsageError(f"R = {args.R} is below {MIN_REPLICATES}; use --R {MIN_REPLICATES} or more")
    nu = _nu(args)
    cache_dir = args.cache_dir or default_cache_dir()
    start = time.perf_counter()
    table, hit = get_table(nu, args.L, args.R, args.seed, cache_dir, args.workers)
    elapsed = time.perf_counter() - start
    path = cache_path(cache_dir, nu, args.L, args.R, args.seed)
    print("cache hit" if hit else f"simulated in {elapsed:.2f}s")
    print(f"artifact: {path}")
    print(f"key: {table.key}")
    for p, q in table.q().items():
        print(f"q({p:.2f}) = {q:.6f}")
    return EXIT_OK


def cmd_test(args) -> int:
    X = read_curve_file(args.x, "X")
    Y = read_curve_file(args.y, "Y")
    if X.grid != Y.grid:
        raise GridMismatchError(f"grid mismatch: {X.grid.size} vs {Y.grid.size} columns")
    table = _table(args)
    cfg = RelevanceTestConfig(j=args.j, delta=args.delta, alpha=args.alpha, nu=table.nu)
    result = (test_eigenvalue if args.eigenvalue else test_eigenfunction)(X, Y, cfg, table)
    payload = {"result": result.to_dict(), "effective_config": _effective(args), "version": __version__}
    print(_dump(payload))
    # an undefined statistic (zero normalizer at D_hat = delta) carries no decision
    return EXIT_DEGENERATE if np.isnan(result.w_hat) else EXIT_OK


def cmd_analyze(args) -> int:
    orders = args.orders
    deltas = args.deltas if len(args.deltas) == len(orders) else args.deltas[:1] * len(orders)
    if len(args.deltas) not in (1, len(orders)):
        raise UsageError("give one delta or one per order")
    grid = Grid(args.grid_size)
    raws = _load_stations(args.stations, _schema(args))
    samples, failures = {}, {}
    for name, raw in raws.items():
        try:
            samples[name] = prepare_station(raw, args.basis_size, args.max_missing, grid)
        except (DataError, ValueError) as exc:
            failures[name] = str(exc)
    if len(samples) + len(failures) < 2:
        raise DataError("analysis needs at least two stations")
    table = _table(args)
    report = run_analysis(samples, orders, deltas, args.alpha, table, args.correction, failures, _effective(args))
    text = _dump(report.to_dict())
    if args.out_json:
        Path(args.out_json).write_text(text + "\n")
    else:
        print(text)
    if args.out_csv:
        with open(args.out_csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ANALYSIS_CSV_COLUMNS)
            w.writerows(report.csv_rows())
    return EXIT_OK


def cmd_power(args) -> int:
    if args.distances is not None:
        grid = [distance_to_phase(d) for d in args.distances]
    elif args.phases is not None:
        grid = args.phases
    else:
        raise UsageError("give --phases or --distances")
    table = _table(args)
    base = DgpConfig(rho=args.rho, burn_in=args.burn_in, grid=Grid(args.grid_size), presmooth=args.presmooth)
    points = run_power_study(
        args.scenario, grid, args.m, args.n, args.replicates, table,
        seed=args.power_seed, order=args.order, delta_rel=args.delta, alpha=args.alpha,
        base=base, workers=args.workers,
    )
    if args.out:
        write_power_csv(points, args.out)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(POWER_CSV_COLUMNS)
        for p in points:
            w.writerow([p.scenario, repr(p.delta), repr(p.distance), p.m, p.n, p.replicates, repr(p.rejection_rate)])
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_ingest(args) -> int:
    raws = _load_stations(args.stations, _schema(args))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = Grid(args.grid_size)
    for name, raw in raws.items():
        curves = build_annual_curves(raw, args.basis_size, args.max_missing, grid)
        if args.detrend:
            curves = detrend_linear(curves)
        if args.format == "long":
            path = write_long_csv(curves, out_dir / f"{name}.long.csv")
        else:
            path = write_curve_file(curves.curves, out_dir / f"{name}.csv")
        dropped = ", ".join(f"{y} ({why})" for y, why in curves.dropped_years) or "none"
        print(f"{name}: {len(curves.years)} years -> {path}; dropped: {dropped}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_table_flags(p):
    p.add_argument("--nu-lower", type=float, default=0.1, help="lower end of the uniform nu measure")
    p.add_argument("--L", type=int, default=DEFAULT_PATH_STEPS, help="Brownian path steps")
    p.add_argument("--R", type=int, default=DEFAULT_REPLICATES, help="Monte Carlo replicates")
    p.add_argument("--seed", type=int, default=0, help="null-table seed")
    p.add_argument("--cache-dir", type=Path, default=None)
    p.add_argument("--workers", type=int, default=1)


def _add_station_flags(p):
    p.add_argument("stations", nargs="+", type=Path, help="long-form daily CSV files")
    p.add_argument("--value-col", default="value")
    p.add_argument("--date-col", default="date")
    p.add_argument("--year-col", default=None)
    p.add_argument("--month-col", default=None)
    p.add_argument("--day-col", default=None)
    p.add_argument("--doy-col", default=None)
    p.add_argument("--station-col", default="station")
    p.add_argument("--basis-size", type=int, default=20, help="interior B-spline knots")
    p.add_argument("--max-missing", type=int, default=30)
    p.add_argument("--grid-size", type=int, default=501)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="releig", description="Relevant-difference tests for eigenfunctions of covariance operators")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", type=Path, default=None, help=f"INI file with a [{CONFIG_SECTION}] section")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate-null", help="simulate and cache a null quantile table")
    _add_table_flags(p)
    p.set_defaults(func=cmd_simulate_null)

    p = sub.add_parser("test", help="test two curve files")
    p.add_argument("x", type=Path)
    p.add_argument("y", type=Path)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--eigenvalue", action="store_true", help="test eigenvalues instead of eigenfunctions")
    _add_table_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("analyze", help="pairwise station analysis")
    _add_station_flags(p)
    p.add_argument("--orders", type=int, nargs="+", default=[1, 2])
    p.add_argument("--deltas", type=float, nargs="+", default=[0.1])
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--correction", choices=["none", "bonferroni", "holm"], default="none")
    p.add_argument("--out-json", type=Path, default=None)
    p.add_argument("--out-csv", type=Path, default=None)
    _add_table_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("power", help="simulated power study")
    p.add_argument("--scenario", type=int, choices=[1, 2], default=1)
    p.add_argument("--phases", type=float, nargs="+", default=None, help="phase shifts (radians)")
    p.add_argument("--distances", type=float, nargs="+", default=None, help="population squared distances")
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--power-seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--burn-in", type=int, default=30)
    p.add_argument("--grid-size", type=int, default=201)
    p.add_argument("--presmooth", action="store_true")
    p.add_argument("--out", type=Path, default=None)
    _add_table_flags(p)
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("ingest", help="convert station CSVs into curve files")
    _add_station_flags(p)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--format", choices=["wide", "long"], default="wide")
    p.add_argument("--detrend", action="store_true")
    p.set_defaults(func=cmd_ingest)
    return parser


def _config_defaults(path: Path, parser: argparse.ArgumentParser, command: str) -> dict:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise UsageError(f"cannot read config file {path}")
    if CONFIG_SECTION not in cp:
        return {}
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    actions = {a.dest.lower(): a for a in sub._actions}
    out = {}
    for key, raw in cp[CONFIG_SECTION].items():
        action = actions.get(key.replace("-", "_").lower())
        if action is None:
            raise UsageError(f"unknown config key {key!r} for {command}")
        dest = action.dest
        if isinstance(action, argparse._StoreTrueAction):
            out[dest] = cp[CONFIG_SECTION].getboolean(key)
        elif action.nargs in ("+", "*"):
            convert = action.type or str
            out[dest] = [convert(x) for x in raw.replace(",", " ").split()]
        elif action.type is not None:
            out[dest] = action.type(raw)
        else:
            out[dest] = raw
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if args.config is not None:
            defaults = _config_defaults(args.config, parser, args.command)
            sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[args.command]
            sub.set_defaults(**defaults)
            args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        _notice(f"usage error: {exc}")
        return EXIT_USAGE
    except (DataError, GridMismatchError, FileNotFoundError, OSError) as exc:
        _notice(f"data error: {exc}")
        return EXIT_DATA
    except np.linalg.LinAlgError as exc:
        _notice(f"numerical error: {exc}")
        return EXIT_DEGENERATE
    except ValueError as exc:
        _notice(f"data error: {exc}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
