import os

import numpy as np
import pytest

from releig.dgp import DgpConfig, simulate_sample
from releig.fda import Grid
from releig.measure import NuMeasure
from releig.nulldist import get_table
from releig.rng import substream


@pytest.fixture(scope="session", autouse=True)
def cache_dir(tmp_path_factory):
    """Keep null tables out of the user's cache for the whole run."""
    path = tmp_path_factory.mktemp("releig-cache")
    old = os.environ.get("RELEIG_CACHE_DIR")
    os.environ["RELEIG_CACHE_DIR"] = str(path)
    yield path
    if old is None:
        os.environ.pop("RELEIG_CACHE_DIR", None)
    else:
        os.environ["RELEIG_CACHE_DIR"] = old


@pytest.fixture(scope="session")
def small_table(cache_dir):
    """Smallest admissible table; enough for unit tests that only need a valid calibration."""
    table, _ = get_table(NuMeasure(), L=500, R=10_000, seed=0, cache_dir=cache_dir)
    return table


@pytest.fixture(scope="session")
def grid101():
    return Grid(101)


def make_pair(delta1=0.0, delta2=0.0, m=100, n=100, grid=None, seed=0):
    base = DgpConfig(grid=grid or Grid(101))
    from dataclasses import replace

    X = simulate_sample(replace(base, delta1=delta1, delta2=delta2, m=m), substream(seed, 0), "X")
    Y = simulate_sample(replace(base, m=n), substream(seed, 1), "Y")
    return X, Y


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_station_csv(path, name, phase=0.0, first_year=1960, years=30, seed=0, missing_years=(), noise=0.2):
    """Daily synthetic station: seasonal cycle plus random sin/cos modes with variances (8, 4), phase shifted."""
    import calendar
    import csv
    import datetime as dt

    gen = np.random.default_rng(seed)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["station", "date", "value"])
        for year in range(first_year, first_year + years):
            n = 366 if calendar.isleap(year) else 365
            t = np.arange(n) / (n - 1)
            a = gen.normal(size=2) * np.sqrt([8.0, 4.0])
            vals = (
                15.0
                + 0.02 * (year - first_year)
                + a[0] * np.sqrt(2) * np.sin(2 * np.pi * t + phase)
                + a[1] * np.sqrt(2) * np.cos(2 * np.pi * t + phase)
                + noise * gen.normal(size=n)
            )
            for k in range(n):
                day = dt.date(year, 1, 1) + dt.timedelta(days=k)
                missing = year in missing_years and k % 5 == 0
                w.writerow([name, day.isoformat(), "" if missing else f"{vals[k]:.4f}"])
    return path


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number, name, ok, detail):
    line = f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
