"""Daily station records to annual curves: load, smooth per year, detrend."""

from __future__ import annotations

import calendar
import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fda import CurveSample, Grid, smooth_to_curve

MISSING_TOKENS = {"", "na", "nan", "null", "-", "missing"}
DEFAULT_MAX_MISSING = 30


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for long-form daily CSV files.

    Dates come from ``date`` (ISO yyyy-mm-dd) when set, otherwise from
    ``year``/``month``/``day``, or ``year`` plus a day-of-year column ``doy``.
    """

    value: str = "value"
    date: str | None = "date"
    year: str | None = None
    month: str | None = None
    day: str | None = None
    doy: str | None = None
    station: str | None = "station"


@dataclass(frozen=True)
class RawSeries:
    station: str
    dates: tuple[dt.date, ...]
    values: np.ndarray  # NaN marks a missing value
    missing_lines: tuple[int, ...] = ()

    @property
    def years(self) -> list[int]:
        return sorted({d.year for d in self.dates})


@dataclass(frozen=True, eq=False)
class AnnualCurveSet:
    station: str
    years: tuple[int, ...]
    curves: CurveSample
    dropped_years: tuple[tuple[int, str], ...] = field(default=())

    def yearly_means(self) -> np.ndarray:
        return self.curves.values @ self.curves.grid.weights


def _parse_date(row: dict, schema: CsvSchema) -> dt.date:
    if schema.date:
        return dt.date.fromisoformat(row[schema.date].strip())
    year = int(row[schema.year])
    if schema.month and schema.day:
        return dt.date(year, int(row[schema.month]), int(row[schema.day]))
    if schema.doy:
        return dt.date(year, 1, 1) + dt.timedelta(days=int(row[schema.doy]) - 1)
    raise DataError("schema needs a date column, year/month/day or year/doy")


def load_csv(path, schema: CsvSchema | None = None, station: str | None = None) -> dict[str, RawSeries]:
    """Read a long-form daily CSV into one RawSeries per station.

    Rows with a missing value are kept (as NaN) and their line numbers
    recorded. Unparseable rows and duplicate dates raise DataError naming the
    offending lines.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    default_station = station or path.stem
    per_station: dict[str, dict[dt.date, tuple[float, int]]] = {}
    missing: dict[str, list[int]] = {}
    bad: list[str] = []
    dupes: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: no records")
        for row in reader:
            line = reader.line_num
            try:
                date = _parse_date(row, schema)
                raw = (row.get(schema.value) or "").strip()
                if schema.value not in row:
                    raise KeyError(schema.value)
                value = float("nan") if raw.lower() in MISSING_TOKENS else float(raw)
            except (ValueError, KeyError, TypeError) as exc:
                bad.append(f"line {line}: {exc}")
                continue
            name = (row.get(schema.station) or "").strip() if schema.station else ""
            name = name or default_station
            records = per_station.setdefault(name, {})
            if date in records:
                dupes.append(f"{date.isoformat()} on lines {records[date][1]} and {line}")
                continue
            records[date] = (value, line)
            if np.isnan(value):
                missing.setdefault(name, []).append(line)
    if bad:
        raise DataError(f"{path}: malformed rows: " + "; ".join(bad))
    if dupes:
        raise DataError(f"{path}: duplicate dates: " + "; ".join(dupes))
    if not per_station:
        raise DataError(f"{path}: no records")
    out = {}
    for name, records in per_station.items():
        dates = tuple(sorted(records))
        out[name] = RawSeries(
            name, dates, np.array([records[d][0] for d in dates]), tuple(missing.get(name, []))
        )
    return out


def day_positions(year: int) -> np.ndarray:
    """Position (day - 1) / (days_in_year - 1) of every day of the year."""
    n = 366 if calendar.isleap(year) else 365
    return np.arange(n) / (n - 1)


def build_annual_curves(
    raw: RawSeries,
    basis_size: int = 20,
    max_missing: int = DEFAULT_MAX_MISSING,
    grid: Grid | None = None,
    method: str = "bspline",
) -> AnnualCurveSet:
    """Smooth each calendar year onto ``grid``; drop years with more than ``max_missing`` missing days.

    Missing days are left out of the least-squares fit.
    """
    grid = grid if grid is not None else Grid()
    by_year: dict[int, list[tuple[int, float]]] = {}
    for d, v in zip(raw.dates, raw.values):
        by_year.setdefault(d.year, []).append((d.timetuple().tm_yday, v))
    years, curves, dropped = [], [], []
    for year in sorted(by_year):
        n_days = 366 if calendar.isleap(year) else 365
        obs = [(doy, v) for doy, v in by_year[year] if np.isfinite(v)]
        n_missing = n_days - len(obs)
        if n_missing > max_missing:
            dropped.append((year, f"{n_missing} missing days > {max_missing}"))
            continue
        doy = np.array([o[0] for o in obs])
        vals = np.array([o[1] for o in obs])
        try:
            curve = smooth_to_curve((doy - 1) / (n_days - 1), vals, basis_size, grid, method)
        except ValueError as exc:
            dropped.append((year, f"smoothing failed: {exc}"))
            continue
        years.append(year)
        curves.append(curve)
    if len(curves) < 2:
        raise DataError(f"station {raw.station}: fewer than two usable years")
    return AnnualCurveSet(raw.station, tuple(years), CurveSample.from_curves(curves, raw.station), tuple(dropped))


def detrend_linear(curve_set: AnnualCurveSet) -> AnnualCurveSet:
    """Remove an OLS line in the year from the yearly means, pointwise from each curve."""
    years = np.asarray(curve_set.years, dtype=float)
    if years.size < 3:
        raise DataError("detrending needs at least three years")
    means = curve_set.yearly_means()
    design = np.column_stack([np.ones_like(years), years - years.mean()])
    coef, *_ = np.linalg.lstsq(design, means, rcond=None)
    fitted = design @ coef
    values = curve_set.curves.values - fitted[:, None]
    samples = CurveSample(curve_set.curves.grid, values, curve_set.curves.label)
    return AnnualCurveSet(curve_set.station, curve_set.years, samples, curve_set.dropped_years)


def trend_coefficients(curve_set: AnnualCurveSet) -> tuple[float, float]:
    """(intercept at the mean year, slope per year) of the yearly means."""
    years = np.asarray(curve_set.years, dtype=float)
    design = np.column_stack([np.ones_like(years), years - years.mean()])
    coef, *_ = np.linalg.lstsq(design, curve_set.yearly_means(), rcond=None)
    return float(coef[0]), float(coef[1])


def write_long_csv(curve_set: AnnualCurveSet, path) -> Path:
    """Export as rows (year, grid_index, value)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "grid_index", "value"])
        for year, row in zip(curve_set.years, curve_set.curves.values):
            for i, v in enumerate(row):
                w.writerow([year, i, repr(float(v))])
    return path


def write_curve_file(sample: CurveSample, path) -> Path:
    """Wide curve file: one time-ordered curve per row, one column per grid point."""
    path = Path(path)
    np.savetxt(path, sample.values, delimiter=",", fmt="%.17g")
    return path


def read_curve_file(path, label: str | None = None) -> CurveSample:
    """Inverse of write_curve_file; the grid size is the column count."""
    path = Path(path)
    try:
        values = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if values.shape[0] < 2:
        raise DataError(f"{path}: need at least two curves, found {values.shape[0]}")
    try:
        return CurveSample(Grid(values.shape[1]), values, label or path.stem)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
