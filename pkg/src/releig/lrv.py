"""Plug-in estimate of the long-run scale zeta_j and the test that uses it.

zeta_j = 2 sqrt(sigma2_X / theta + sigma2_Y / (1 - theta)), where sigma2_X is
the long-run variance of the scores

    Xbar_i = int int (X_i(s1) X_i(s2) - C(s1, s2)) f_j(s1, s2) ds1 ds2,
    f_j(s1, s2) = -v_j(s1) sum_{k != j} v_k(s2) <v_k, w_j> / (tau_j - tau_k),

with (v, tau) the eigenpairs of the own sample and w_j the order-j
eigenfunction of the other sample. Estimated eigenquantities replace the
population ones and the sum over k is truncated at K.

This is a diagnostic: the plug-in test is sensitive to the bandwidth and to
the truncation, and the self-normalized test should be preferred.
"""

from __future__ import annotations

import math
import warnings as _warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .covop import CovKernel, EigenSystem, align_signs, eigen_decompose, estimate_cov
from .fda import CurveSample, Grid, _check_grid, center
from .selfnorm import RelevanceTestConfig, TestResult, dhat_distance

SPACING_RTOL = 1e-10
DIAGNOSTIC_NOTE = "diagnostic: unreliable zeta_hat (plug-in long-run variance)"


@dataclass(frozen=True, eq=False)
class ScoreKernel:
    grid: Grid
    matrix: np.ndarray
    truncation: int
    small_spacing: bool = False


@dataclass(frozen=True)
class LrvEstimate:
    sigma2_X: float
    sigma2_Y: float
    theta: float
    zeta: float
    bandwidth: int
    truncation: int = 0
    warnings: tuple[str, ...] = ()


def zeta_from_variances(sigma2_X: float, sigma2_Y: float, theta: float) -> float:
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    return 2.0 * math.sqrt(sigma2_X / theta + sigma2_Y / (1.0 - theta))


def score_kernel(own: EigenSystem, other: EigenSystem, j: int, K: int) -> ScoreKernel:
    """f_j on the grid, built from the first K eigenpairs of ``own``."""
    _check_grid(own.grid, other.grid)
    if not 1 <= j <= K:
        raise ValueError("need 1 <= j <= K")
    if own.count < K or other.count < j:
        raise ValueError("eigensystems provide too few eigenpairs")
    tau = own.eigenvalues[:K]
    gaps = -np.diff(tau)
    if tau[0] <= 0 or np.any(gaps < SPACING_RTOL * tau[0]):
        raise ValueError(f"eigenvalue spacing among the first {K} is below {SPACING_RTOL:g} * tau_1")
    w = own.grid.weights
    v = own.eigenfunctions[:K]
    target = other.eigenfunctions[j - 1]
    if float(v[j - 1] @ (w * target)) < 0:
        target = -target
    ks = [k for k in range(K) if k != j - 1]
    coef = np.array([(v[k] @ (w * target)) / (tau[j - 1] - tau[k]) for k in ks])
    g = coef @ v[ks] if ks else np.zeros(own.grid.size)
    matrix = -np.outer(v[j - 1], g)
    min_gap = np.min(np.abs(tau[j - 1] - tau[ks])) if ks else np.inf
    return ScoreKernel(own.grid, matrix, K, bool(min_gap < 1e-6))


def projected_scores(sample: CurveSample, cov: CovKernel, f: ScoreKernel) -> np.ndarray:
    """Double-quadrature contractions of X_i X_i - C against f, one per curve."""
    _check_grid(sample.grid, f.grid)
    w = sample.grid.weights
    xw = sample.values * w
    quad = np.einsum("ia,ab,ib->i", xw, f.matrix, xw)
    offset = float(np.sum(np.outer(w, w) * cov.matrix * f.matrix))
    return quad - offset


def hac_variance(series, bandwidth: int) -> float:
    """Bartlett-weighted long-run variance: sum of autocovariances up to ``bandwidth``.

    Negative estimates are clipped at zero with a RuntimeWarning.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if bandwidth < 0 or bandwidth >= n:
        raise ValueError(f"bandwidth must lie in [0, {n - 1}], got {bandwidth}")
    if n <= 2 * bandwidth:
        raise ValueError("series must be longer than twice the bandwidth")
    x = x - x.mean()
    total = float(x @ x) / n
    for lag in range(1, bandwidth + 1):
        gamma = float(x[lag:] @ x[:-lag]) / n
        total += 2.0 * (1.0 - lag / (bandwidth + 1)) * gamma
    if total < 0:
        _warnings.warn("negative long-run variance estimate clipped at 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return total


def default_bandwidth(n: int) -> int:
    return int(math.floor(n ** (1.0 / 3.0) + 1e-9))


def default_truncation(*systems: EigenSystem, rtol: float = 1e-6) -> int:
    return min(int(np.sum(s.eigenvalues > rtol * s.eigenvalues[0])) for s in systems)


def estimate_zeta(
    X: CurveSample,
    Y: CurveSample,
    j: int = 1,
    K: int | None = None,
    bandwidth: int | None = None,
    do_center: bool = True,
) -> LrvEstimate:
    _check_grid(X.grid, Y.grid)
    if do_center:
        X, Y = center(X), center(Y)
    m, n = len(X), len(Y)
    cx, cy = estimate_cov(X), estimate_cov(Y)
    J = min(X.grid.size, max(K or 0, j, 12))
    ex, ey = eigen_decompose(cx, J), eigen_decompose(cy, J)
    K = K if K is not None else default_truncation(ex, ey)
    if K < j:
        raise ValueError(f"truncation K={K} is below the order j={j}")
    ey = align_signs(ex, ey)
    fx = score_kernel(ex, ey, j, K)
    fy = score_kernel(ey, ex, j, K)
    bx = bandwidth if bandwidth is not None else default_bandwidth(m)
    by = bandwidth if bandwidth is not None else default_bandwidth(n)
    notes = []
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        s2x = hac_variance(projected_scores(X, cx, fx), bx)
        s2y = hac_variance(projected_scores(Y, cy, fy), by)
    notes.extend(str(c.message) for c in caught)
    if fx.small_spacing or fy.small_spacing:
        notes.append("eigenvalue spacing below 1e-6: score kernel is large")
    theta = m / (m + n)
    return LrvEstimate(s2x, s2y, theta, zeta_from_variances(s2x, s2y, theta), max(bx, by), K, tuple(notes))


def normal_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError("probability must lie in (0, 1)")
    return float(ndtri(p))


def test_lrv_plugin(X: CurveSample, Y: CurveSample, cfg: RelevanceTestConfig, lrv: LrvEstimate) -> TestResult:
    """Reject when sqrt(m + n) (D_hat - delta) / zeta_hat exceeds the normal (1 - alpha) quantile."""
    d_hat = dhat_distance(X, Y, cfg.j, cfg.center)
    crit = normal_quantile(1.0 - cfg.alpha)
    notes = [DIAGNOSTIC_NOTE, *lrv.warnings]
    if not lrv.zeta > 0:
        return TestResult(
            "lrv-plugin", d_hat, 0.0, float("nan"), float("nan"), False, crit,
            tuple(notes + ["degenerate: zeta_hat = 0, no decision"]), cfg.echo(),
        )
    stat = math.sqrt(len(X) + len(Y)) * (d_hat - cfg.delta) / lrv.zeta
    return TestResult(
        "lrv-plugin", d_hat, lrv.zeta, stat, float(1.0 - ndtr(stat)), bool(stat > crit), crit,
        tuple(notes), {**cfg.echo(), "bandwidth": lrv.bandwidth, "K": lrv.truncation},
    )
