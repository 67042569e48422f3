"""Acceptance criteria, one test per criterion.

Design choices are fixed before any run: master seed 0, the default null
table (L = 1000, R = 100,000, seed 0), analysis grid P = 201, 500 replicates.
Each test records a PASS/FAIL line that is repeated in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from releig.covop import eigen_decompose, estimate_cov, estimate_cov_partial
from releig.dgp import (
    DgpConfig,
    basis_functions,
    distance_to_phase,
    replicate_pair,
    run_multiple_study,
    run_power_study,
    simulate_sample,
)
from releig.fda import CurveSample, Grid, center
from releig.ingest import AnnualCurveSet, detrend_linear
from releig.lrv import estimate_zeta
from releig.measure import NuMeasure
from releig.multiplicity import bonferroni, holm
from releig.nulldist import get_table, quantile, simulate_W
from releig.rng import substream
from releig.selfnorm import dhat_distance, studentize, vhat

from conftest import record_criterion

SEED = 0
REPLICATES = 500
GRID = Grid(201)
BASE = DgpConfig(grid=GRID)
BOUNDARY_PHASE = distance_to_phase(0.1)
SCENARIO1_PHASES = [0.0, BOUNDARY_PHASE, math.pi / 2]
MULTI_BOUNDARY = (BOUNDARY_PHASE, 0.3155)
MULTI_STRONG = (math.pi / 2, 2.0)
SCENARIO2_PHASE = 2.0  # aligned distance 2 (1 - |cos 2|) = 1.17 for order 3

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def table(cache_dir):
    return get_table(NuMeasure(), 1000, 100_000, 0, cache_dir)[0]


@pytest.fixture(scope="module")
def scenario1(table):
    start = time.perf_counter()
    pts = run_power_study(1, SCENARIO1_PHASES, 100, 100, REPLICATES, table, seed=SEED, base=BASE)
    return pts, time.perf_counter() - start


@pytest.fixture(scope="module")
def multi(table):
    return {
        name: run_multiple_study(*phases, 100, 100, REPLICATES, table, seed=SEED, base=BASE)
        for name, phases in (("boundary", MULTI_BOUNDARY), ("strong", MULTI_STRONG))
    }


@pytest.fixture(scope="module")
def scenario2(table):
    return {
        j: run_power_study(2, [SCENARIO2_PHASE], 100, 100, REPLICATES, table, seed=SEED, order=j, base=BASE)[0]
        for j in (2, 3)
    }


@pytest.fixture(scope="module")
def null_tables():
    start = time.perf_counter()
    tabs = [simulate_W(NuMeasure(), 1000, 200_000, seed) for seed in (1, 2)]
    return tabs, time.perf_counter() - start


def test_criterion_01_eigen_oracle():
    start = time.perf_counter()
    worst_val = worst_fun = 0.0
    for r in range(20):
        d1, d2 = 0.37 * r, 0.11 * r
        cfg = DgpConfig(delta1=d1, delta2=d2, m=100, grid=GRID)
        X = center(simulate_sample(cfg, substream(SEED, 900, r)))
        es = eigen_decompose(estimate_cov(X), 4)
        B = basis_functions(d1, d2, GRID.points)
        coef = np.linalg.lstsq(B.T, X.values.T, rcond=None)[0].T
        G = (B * GRID.weights) @ B.T
        Gh = np.linalg.cholesky(G)
        vals, vecs = np.linalg.eigh(Gh.T @ (coef.T @ coef / len(coef)) @ Gh)
        vals, vecs = vals[::-1], vecs[:, ::-1]
        funcs = np.linalg.solve(Gh.T, vecs).T @ B
        worst_val = max(worst_val, np.abs(es.eigenvalues - vals).max())
        for j in range(4):
            f = funcs[j] * np.sign(funcs[j] @ (GRID.weights * es.eigenfunctions[j]))
            worst_fun = max(worst_fun, math.sqrt(((f - es.eigenfunctions[j]) ** 2) @ GRID.weights))
    elapsed = time.perf_counter() - start
    ok = worst_val < 1e-6 and worst_fun < 1e-6 and elapsed < 10
    record_criterion(1, "eigen oracle", ok,
                     f"max eigenvalue err {worst_val:.2e}, max L2 eigenfunction err {worst_fun:.2e}, {elapsed:.2f}s")
    assert ok


def test_criterion_02_null_law_consistency(null_tables):
    (a, b), elapsed = null_tables
    qa, qb = quantile(a, 0.95), quantile(b, 0.95)
    ma, mb = quantile(a, 0.5), quantile(b, 0.5)
    tol = 0.01 * (1 + abs(qa))
    ok = abs(qa - qb) <= tol and abs(ma) <= 0.02 and abs(mb) <= 0.02 and elapsed < 120
    record_criterion(2, "null law consistency", ok,
                     f"q95 {qa:.4f} vs {qb:.4f} (|diff| {abs(qa - qb):.4f} <= {tol:.4f}), "
                     f"medians {ma:+.4f}, {mb:+.4f}, {elapsed:.1f}s for both tables")
    assert ok


def test_criterion_03_boundary_size(scenario1):
    pts, elapsed = scenario1
    rate = pts[1].rejection_rate
    ok = 0.02 <= rate <= 0.09 and elapsed < 15 * 60
    record_criterion(3, "size at the boundary", ok,
                     f"distance {pts[1].distance:.4f}, rate {rate:.3f} in [0.02, 0.09], "
                     f"{elapsed:.1f}s for 3 design points")
    assert ok


def test_criterion_04_interior_null(scenario1):
    rate = scenario1[0][0].rejection_rate
    ok = rate <= 0.02
    record_criterion(4, "sub-nominal size at distance 0", ok, f"rate {rate:.3f} <= 0.02")
    assert ok


def test_criterion_05_power_at_orthogonality(scenario1):
    rate = scenario1[0][2].rejection_rate
    ok = 0.65 <= rate <= 0.85
    record_criterion(5, "power at orthogonality", ok, f"rate {rate:.3f} in [0.65, 0.85]")
    assert ok


def test_criterion_06_multiple_testing(multi):
    bnd, strong = multi["boundary"], multi["strong"]
    fwer_ok = max(bnd["bonferroni"]) <= 0.06
    b4, h4 = strong["bonferroni"][3], strong["holm"][3]
    power_ok = 0.45 <= b4 <= 0.70 and 0.45 <= h4 <= 0.70
    dom_ok = bnd["holm_dominates"] and strong["holm_dominates"]
    ok = fwer_ok and power_ok and dom_ok
    record_criterion(6, "Bonferroni/Holm family-wise control and power", ok,
                     "boundary Bonferroni FWER p=1..4 " + ", ".join(f"{x:.3f}" for x in bnd["bonferroni"])
                     + f" (<= 0.06); strong p=4 Bonferroni {b4:.3f}, Holm {h4:.3f} (in [0.45, 0.70]); "
                     f"Holm dominates on every replicate: {dom_ok}")
    assert ok


def test_criterion_07_scenario2_selectivity(scenario2):
    r2, r3 = scenario2[2].rejection_rate, scenario2[3].rejection_rate
    ok = r2 <= 0.05 and r3 > 0.5 and scenario2[3].distance >= 0.5
    record_criterion(7, "scenario 2 selectivity", ok,
                     f"order-3 distance {scenario2[3].distance:.3f}; order 2 rate {r2:.3f} (<= 0.05), "
                     f"order 3 rate {r3:.3f} (> 0.5)")
    assert ok


# ---------------------------------------------------------------- criterion 8

NONZERO = st.floats(0.05, 20.0) | st.floats(-20.0, -0.05)
CASES = settings(max_examples=200, deadline=None, database=None)


@CASES
@given(NONZERO, NONZERO, st.integers(0, 2**20))
def _scale_invariance(cx, cy, seed):
    X, Y = replicate_pair(DgpConfig(grid=Grid(33)), 0.7, 0.0, 30, 30, seed, 0)
    nu = NuMeasure()
    w0 = studentize(dhat_distance(X, Y, 1), 0.1, vhat(X, Y, 1, nu))[0]
    Xs, Ys = X.scaled(cx), Y.scaled(cy)
    w1 = studentize(dhat_distance(Xs, Ys, 1), 0.1, vhat(Xs, Ys, 1, nu))[0]
    assert abs(w1 - w0) <= 1e-9


@CASES
@given(st.integers(0, 2**20), st.booleans(), st.booleans())
def _sign_flip(seed, flip_x, flip_y):
    X, Y = replicate_pair(DgpConfig(grid=Grid(33)), 0.9, 0.4, 30, 30, seed, 0)
    nu = NuMeasure()
    Xf = X.scaled(-1.0) if flip_x else X
    Yf = Y.scaled(-1.0) if flip_y else Y
    assert dhat_distance(Xf, Yf, 2) == dhat_distance(X, Y, 2)
    assert vhat(Xf, Yf, 2, nu) == vhat(X, Y, 2, nu)


@CASES
@given(arrays(np.float64, st.tuples(st.integers(2, 15), st.just(16)), elements=st.floats(-1e3, 1e3)))
def _partial_full(values):
    s = CurveSample(Grid(16), values)
    assert np.array_equal(estimate_cov_partial(s, 1.0).matrix, estimate_cov(s).matrix)


@CASES
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8), st.sampled_from([0.01, 0.05, 0.1]))
def _holm_dominance(p, alpha):
    assert np.all(holm(p, alpha).reject_flags >= bonferroni(p, alpha).reject_flags)


@CASES
@given(arrays(np.float64, st.tuples(st.integers(2, 15), st.just(16)), elements=st.floats(-1e3, 1e3)))
def _center_idempotence(values):
    once = center(CurveSample(Grid(16), values))
    assert np.array_equal(center(once).values, once.values)


@CASES
@given(arrays(np.float64, st.tuples(st.integers(3, 15), st.just(16)), elements=st.floats(-100, 100)))
def _detrend_idempotence(values):
    cs = AnnualCurveSet("S", tuple(range(2000, 2000 + len(values))), CurveSample(Grid(16), values))
    once = detrend_linear(cs)
    assert np.abs(detrend_linear(once).curves.values - once.curves.values).max() <= 1e-10


def test_criterion_08_invariance_suite():
    props = {
        "joint scale invariance of W_hat (1e-9)": _scale_invariance,
        "sign-flip exactness": _sign_flip,
        "partial/full equality at lambda = 1": _partial_full,
        "Holm dominates Bonferroni": _holm_dominance,
        "center idempotence": _center_idempotence,
        "detrend idempotence": _detrend_idempotence,
    }
    failed = []
    for name, prop in props.items():
        try:
            prop()
        except AssertionError as exc:
            failed.append(f"{name}: {str(exc).splitlines()[0] if str(exc) else 'falsified'}")
    ok = not failed
    record_criterion(8, "invariance suite", ok,
                     f"{len(props)} properties x 200 cases" + ("" if ok else "; failed: " + "; ".join(failed)))
    assert ok


def test_criterion_09_lrv_diagnostic():
    m = 2000
    out = {}
    for name, phase in (("aligned", 0.0), ("orthogonal", math.pi / 2)):
        X, Y = replicate_pair(BASE, phase, 0.0, m, m, SEED, 0)
        out[name] = estimate_zeta(X, Y, 1, K=4).zeta
    ok_a = 2.5 <= out["aligned"] <= 6.0
    ok_o = 7.0 <= out["orthogonal"] <= 14.0
    record_criterion(9, "long-run variance diagnostic", ok_a and ok_o,
                     f"zeta_hat at distance 0: {out['aligned']:.3f} (target [2.5, 6]); "
                     f"at orthogonality: {out['orthogonal']:.3f} (target [7, 14]); bandwidth 12, K = 4")
    assert ok_a and ok_o


def test_criterion_10_determinism(table, scenario1, multi, scenario2, null_tables):
    checks = {}
    pts = run_power_study(1, SCENARIO1_PHASES, 100, 100, REPLICATES, table, seed=SEED, base=BASE, workers=2)
    checks["scenario 1 power"] = pts == scenario1[0]
    for name, phases in (("boundary", MULTI_BOUNDARY), ("strong", MULTI_STRONG)):
        again = run_multiple_study(*phases, 100, 100, REPLICATES, table, seed=SEED, base=BASE, workers=2)
        checks[f"multiple testing {name}"] = np.array_equal(again["p_values"], multi[name]["p_values"])
    for j in (2, 3):
        again = run_power_study(2, [SCENARIO2_PHASE], 100, 100, REPLICATES, table, seed=SEED, order=j,
                                base=BASE, workers=2)[0]
        checks[f"scenario 2 order {j}"] = again == scenario2[j]
    for k, seed in enumerate((1, 2)):
        again = simulate_W(NuMeasure(), 1000, 200_000, seed, workers=3)
        checks[f"null table seed {seed}"] = np.array_equal(again.samples, null_tables[0][k].samples)
    ok = all(checks.values())
    record_criterion(10, "determinism across worker counts", ok,
                     ", ".join(f"{k}: {'identical' if v else 'DIFFERENT'}" for k, v in checks.items()))
    assert ok
