"""Simulated functional time series with phase-shifted Fourier eigenfunctions.

Curves are

    X_i(t) = xi_1 sqrt2 sin(2 pi t + d1) + xi_2 sqrt2 cos(2 pi t + d1)
           + xi_3 sqrt2 sin(4 pi t + d2) + xi_4 sqrt2 cos(4 pi t + d2),

with the coefficient vector following a stationary VAR(1)
xi_i = rho xi_{i-1} + sqrt(1 - rho^2) e_i, e_i ~ N(0, diag(tau)).
The phases enter directly, so v_j at phase d sits at squared distance
2 (1 - |cos d|) from the unshifted one.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .fda import Curve, CurveSample, Grid, smooth_to_curve
from .measure import NuMeasure
from .multiplicity import bonferroni, holm
from .nulldist import QuantileTable
from .rng import normals, substream
from .selfnorm import RelevanceTestConfig, test_eigenfunctions

DEFAULT_TAU = (8.0, 4.0, 0.5, 0.3)
POWER_CSV_COLUMNS = ("scenario", "delta", "distance", "m", "n", "replicates", "rejection_rate")


@dataclass(frozen=True)
class DgpConfig:
    tau: tuple[float, ...] = DEFAULT_TAU
    rho: float = 0.5
    delta1: float = 0.0
    delta2: float = 0.0
    m: int = 100
    burn_in: int = 30
    grid: Grid = field(default_factory=lambda: Grid(201))
    seed: int = 0
    presmooth: bool = False

    def __post_init__(self):
        tau = tuple(float(t) for t in self.tau)
        if len(tau) != 4 or any(t <= 0 for t in tau) or any(a <= b for a, b in zip(tau, tau[1:])):
            raise ValueError("tau must be four strictly decreasing positive variances")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("AR coefficient must satisfy |rho| < 1")
        if self.burn_in < 30:
            raise ValueError("burn-in must be at least 30")
        if self.m < 2:
            raise ValueError("need at least two curves")
        object.__setattr__(self, "tau", tau)


def basis_functions(delta1: float, delta2: float, t: np.ndarray) -> np.ndarray:
    """The four phase-shifted Fourier functions as a (4, len(t)) array."""
    r2 = math.sqrt(2.0)
    return np.stack(
        [
            r2 * np.sin(2 * np.pi * t + delta1),
            r2 * np.cos(2 * np.pi * t + delta1),
            r2 * np.sin(4 * np.pi * t + delta2),
            r2 * np.cos(4 * np.pi * t + delta2),
        ]
    )


def simulate_coefficients(cfg: DgpConfig, gen: np.random.Generator) -> np.ndarray:
    """(m, 4) VAR(1) coefficients after discarding the burn-in.

    The recursion starts from a draw of its stationary law N(0, diag(tau)).
    """
    sd = np.sqrt(np.asarray(cfg.tau))
    total = cfg.burn_in + cfg.m
    e = normals(gen, (total + 1, 4)) * sd
    xi = np.empty((total + 1, 4))
    xi[0] = e[0]
    a, b = cfg.rho, math.sqrt(1.0 - cfg.rho**2)
    for i in range(1, total + 1):
        xi[i] = a * xi[i - 1] + b * e[i]
    return xi[1 + cfg.burn_in:]


def simulate_sample(cfg: DgpConfig, gen: np.random.Generator | None = None, label: str = "") -> CurveSample:
    """Draw m curves on ``cfg.grid``; ``gen`` defaults to the substream of ``cfg.seed``.

    With ``presmooth`` the curves are first evaluated at 1000 points and
    smoothed onto cubic B-splines with 20 interior knots.
    """
    gen = gen if gen is not None else substream(cfg.seed)
    xi = simulate_coefficients(cfg, gen)
    if not cfg.presmooth:
        return CurveSample(cfg.grid, xi @ basis_functions(cfg.delta1, cfg.delta2, cfg.grid.points), label)
    fine = np.linspace(0.0, 1.0, 1000)
    raw = xi @ basis_functions(cfg.delta1, cfg.delta2, fine)
    curves = [smooth_to_curve(fine, row, 20, cfg.grid) for row in raw]
    return CurveSample.from_curves(curves, label)


def population_eigenfunction(j: int, delta1: float, delta2: float, grid: Grid) -> Curve:
    if j not in (1, 2, 3, 4):
        raise ValueError(f"order must be 1..4, got {j}")
    return Curve(grid, basis_functions(delta1, delta2, grid.points)[j - 1])


def phase_to_distance(delta: float) -> float:
    """Squared L2 distance 2 (1 - cos delta) between sqrt2 sin(2 pi k t + delta) and sqrt2 sin(2 pi k t)."""
    return 2.0 * (1.0 - math.cos(delta))


def distance_to_phase(distance: float) -> float:
    """Phase in [0, pi/2] whose sign-aligned distance 2 (1 - cos delta) equals ``distance``."""
    if not 0.0 <= distance <= 2.0:
        raise ValueError("aligned distance must lie in [0, 2]")
    return math.acos(1.0 - distance / 2.0)


def aligned_distance(delta: float) -> float:
    """Distance after sign alignment, 2 (1 - |cos delta|)."""
    return 2.0 * (1.0 - abs(math.cos(delta)))


# Scenario 1 moves the first-frequency pair (orders 1, 2), scenario 2 the second (orders 3, 4).
SCENARIO_ORDER = {1: 1, 2: 3}


def scenario_phases(scenario: int, delta: float) -> tuple[float, float]:
    if scenario == 1:
        return delta, 0.0
    if scenario == 2:
        return 0.0, delta
    raise ValueError(f"unknown scenario {scenario}")


def population_distance(scenario: int, delta: float, j: int) -> float:
    d1, d2 = scenario_phases(scenario, delta)
    return aligned_distance(d1 if j <= 2 else d2)


@dataclass(frozen=True)
class PowerPoint:
    scenario: int
    delta: float
    distance: float
    m: int
    n: int
    replicates: int
    rejection_rate: float
    order: int = 1

    def row(self) -> list:
        return [self.scenario, self.delta, self.distance, self.m, self.n, self.replicates, self.rejection_rate]


def replicate_pair(
    base: DgpConfig, delta1: float, delta2: float, m: int, n: int, seed: int, replicate: int
) -> tuple[CurveSample, CurveSample]:
    """Samples X (shifted phases) and Y (zero phases) for one replicate.

    Streams depend only on (seed, replicate), so every design point reuses the
    same innovations.
    """
    cx = replace(base, delta1=delta1, delta2=delta2, m=m)
    cy = replace(base, delta1=0.0, delta2=0.0, m=n)
    X = simulate_sample(cx, substream(seed, replicate, 0), "X")
    Y = simulate_sample(cy, substream(seed, replicate, 1), "Y")
    return X, Y


def _replicate_rejections(args) -> np.ndarray:
    """Reject flags (n_points, n_orders) for one replicate."""
    base, phases, orders, delta_rel, m, n, seed, r, table, cfg = args
    out = np.zeros((len(phases), len(orders)), dtype=bool)
    for i, (d1, d2) in enumerate(phases):
        X, Y = replicate_pair(base, d1, d2, m, n, seed, r)
        res = test_eigenfunctions(X, Y, orders, delta_rel, table, cfg)
        out[i] = [t.reject for t in res]
    return out


def _map_replicates(func, jobs: list, workers: int) -> list:
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(func, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [func(job) for job in jobs]


def run_power_study(
    scenario: int,
    delta_grid: Sequence[float],
    m: int,
    n: int,
    replicates: int,
    table: QuantileTable,
    seed: int = 0,
    order: int | None = None,
    delta_rel: float = 0.1,
    alpha: float = 0.05,
    base: DgpConfig | None = None,
    workers: int = 1,
) -> list[PowerPoint]:
    """Rejection rates of the order-j eigenfunction test over a grid of phases.

    ``order`` defaults to 1 for scenario 1 and 3 for scenario 2. Results are
    identical for any ``workers``.
    """
    if replicates < 100:
        raise ValueError("power studies need at least 100 replicates")
    order = order if order is not None else SCENARIO_ORDER[scenario]
    base = base if base is not None else DgpConfig()
    cfg = RelevanceTestConfig(j=order, delta=delta_rel, alpha=alpha, nu=table.nu)
    phases = [scenario_phases(scenario, d) for d in delta_grid]
    jobs = [(base, phases, [order], delta_rel, m, n, seed, r, table, cfg) for r in range(replicates)]
    flags = np.stack(_map_replicates(_replicate_rejections, jobs, workers))
    rates = flags[:, :, 0].mean(axis=0)
    return [
        PowerPoint(scenario, float(d), population_distance(scenario, d, order), m, n, replicates, float(rate), order)
        for d, rate in zip(delta_grid, rates)
    ]


def _replicate_pvalues(args) -> np.ndarray:
    base, d1, d2, orders, delta_rel, m, n, seed, r, table, cfg = args
    X, Y = replicate_pair(base, d1, d2, m, n, seed, r)
    return np.array([t.p_value for t in test_eigenfunctions(X, Y, orders, delta_rel, table, cfg)])


def run_multiple_study(
    delta1: float,
    delta2: float,
    m: int,
    n: int,
    replicates: int,
    table: QuantileTable,
    seed: int = 0,
    max_order: int = 4,
    delta_rel: float = 0.1,
    alpha: float = 0.05,
    base: DgpConfig | None = None,
    workers: int = 1,
) -> dict:
    """Family-wise rejection rates of Bonferroni and Holm over orders 1..p, p = 1..max_order.

    Returns ``{"bonferroni": [...], "holm": [...], "holm_dominates": bool}``
    with one rate per p.
    """
    base = base if base is not None else DgpConfig()
    orders = list(range(1, max_order + 1))
    cfg = RelevanceTestConfig(j=1, delta=delta_rel, alpha=alpha, nu=table.nu)
    jobs = [(base, delta1, delta2, orders, delta_rel, m, n, seed, r, table, cfg) for r in range(replicates)]
    pv = np.stack(_map_replicates(_replicate_pvalues, jobs, workers))
    bon = np.zeros((replicates, max_order), dtype=bool)
    hb = np.zeros_like(bon)
    dominated = True
    for r in range(replicates):
        for p in orders:
            b = bonferroni(pv[r, :p], alpha)
            h = holm(pv[r, :p], alpha)
            bon[r, p - 1], hb[r, p - 1] = b.global_reject, h.global_reject
            dominated &= bool(np.all(h.reject_flags >= b.reject_flags))
    return {
        "p_values": pv,
        "bonferroni": bon.mean(axis=0).tolist(),
        "holm": hb.mean(axis=0).tolist(),
        "holm_dominates": dominated,
    }


def write_power_csv(points: Sequence[PowerPoint], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POWER_CSV_COLUMNS)
        for p in points:
            w.writerow([p.scenario, repr(p.delta), repr(p.distance), p.m, p.n, p.replicates, repr(p.rejection_rate)])
    return path
