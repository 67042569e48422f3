"""Self-normalized tests for relevant differences in eigenfunctions and eigenvalues.

For order j the eigenfunction statistic is

    W_hat = (D_hat - delta) / V_hat,

where D_hat = ||v^X_j - v^Y_j||^2 and V_hat is built from the partial-sample
process D(t, lam) = lam * (v^X_j(t, lam) - v^Y_j(t, lam)):

    V_hat = ( int ( ||D(., lam)||^2 - lam^2 ||D(., 1)||^2 )^2 nu(d lam) )^(1/2).

The null ``D <= delta`` is rejected when W_hat exceeds the (1 - alpha)
quantile of the simulated limit law (see :mod:`releig.nulldist`).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .covop import PartialEigenPath, partial_eigen_path
from .fda import Curve, CurveSample, _check_grid, center
from .measure import NuMeasure
from .nulldist import QuantileTable, p_value, quantile

__all__ = [
    "NuMeasure",
    "RelevanceTestConfig",
    "TestResult",
    "EigenPaths",
    "eigen_paths",
    "dhat_process",
    "dhat_distance",
    "vhat",
    "test_eigenfunction",
    "test_eigenfunctions",
    "test_eigenvalue",
]


@dataclass(frozen=True)
class RelevanceTestConfig:
    j: int = 1
    delta: float = 0.1
    alpha: float = 0.05
    nu: NuMeasure = field(default_factory=NuMeasure)
    J_max: int | None = None
    center: bool = True

    def __post_init__(self):
        if self.j < 1:
            raise ValueError("eigenfunction order j must be >= 1")
        if not self.delta > 0:
            raise ValueError("relevance threshold delta must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.J_max is not None and self.j > self.J_max:
            raise ValueError("j exceeds J_max")

    @property
    def n_pairs(self) -> int:
        return self.J_max if self.J_max is not None else self.j

    def echo(self) -> dict:
        return {
            "j": self.j,
            "delta": self.delta,
            "alpha": self.alpha,
            "nu_lower": self.nu.lower,
            "nu_grid_size": int(self.nu.lambda_grid.size),
            "J_max": self.n_pairs,
            "center": self.center,
        }


@dataclass(frozen=True)
class TestResult:
    """Outcome of one relevance test.

    ``d_hat``/``v_hat``/``w_hat`` are the distance estimate, its
    self-normalizer and the studentized statistic. For the eigenvalue test they
    hold the squared eigenvalue gap, its normalizer and the ratio.
    """

    __test__ = False  # not a pytest class

    kind: str
    d_hat: float
    v_hat: float
    w_hat: float
    p_value: float
    reject: bool
    critical_value: float
    warnings: tuple[str, ...] = ()
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["warnings"] = list(self.warnings)
        for k in ("d_hat", "v_hat", "w_hat", "critical_value"):
            v = out[k]
            if not np.isfinite(v):
                out[k] = None if np.isnan(v) else ("inf" if v > 0 else "-inf")
        return out


@dataclass(frozen=True, eq=False)
class EigenPaths:
    """Partial-sample eigenpaths of both samples along a lambda grid ending at 1."""

    x: PartialEigenPath
    y: PartialEigenPath
    warnings: tuple[str, ...]

    @property
    def lambdas(self) -> np.ndarray:
        return self.x.lambdas

    def defined(self) -> np.ndarray:
        return (self.x.counts >= 1) & (self.y.counts >= 1)

    def aligned_functions(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """(L, P) eigenfunction paths of order j with the sign conventions applied.

        v^X(., lam) is aligned with v^X(., 1), then v^Y(., lam) with v^X(., lam);
        zero inner products keep their sign.
        """
        w = self.x.grid.weights
        vx = self.x.eigenfunctions[:, j - 1]
        vy = self.y.eigenfunctions[:, j - 1]
        ref = vx[-1]
        sx = np.where(vx @ (w * ref) < 0, -1.0, 1.0)
        vx = vx * sx[:, None]
        sy = np.where(np.sum(vx * vy * w, axis=1) < 0, -1.0, 1.0)
        vy = vy * sy[:, None]
        return vx, vy

    def dhat_curves(self, j: int) -> np.ndarray:
        vx, vy = self.aligned_functions(j)
        d = self.lambdas[:, None] * (vx - vy)
        d[~self.defined()] = 0.0
        return d

    def dhat_norms(self, j: int) -> np.ndarray:
        """||D(., lam)||^2 along the grid."""
        d = self.dhat_curves(j)
        return d**2 @ self.x.grid.weights

    def eigenvalue_gap(self, j: int) -> np.ndarray:
        """T(lam) = lam * (tau^X_j(lam) - tau^Y_j(lam)) along the grid."""
        t = self.lambdas * (self.x.eigenvalues[:, j - 1] - self.y.eigenvalues[:, j - 1])
        t[~self.defined()] = 0.0
        return t

    def order_warnings(self, j: int) -> tuple[str, ...]:
        out = list(self.warnings)
        for name, path in (("X", self.x), ("Y", self.y)):
            ok = path.counts >= 1
            short = ok & (path.counts < j)
            if np.any(short):
                out.append(
                    f"sample {name}: partial kernels at lambda <= {path.lambdas[short].max():.3g} "
                    f"have rank below order {j}"
                )
            bad = ok & path.ill_separated[:, j - 1] & ~short
            if np.any(bad):
                lam = path.lambdas[bad]
                out.append(
                    f"sample {name}: ill-separated eigenvalue of order {j} at {bad.sum()} "
                    f"lambda values ({lam.min():.3g}..{lam.max():.3g})"
                )
            if np.any(~ok):
                out.append(f"sample {name}: empty partial samples at {int((~ok).sum())} lambda values")
        return tuple(out)


def _prepare(X: CurveSample, Y: CurveSample, do_center: bool) -> tuple[CurveSample, CurveSample]:
    _check_grid(X.grid, Y.grid)
    if do_center:
        return center(X), center(Y)
    return X, Y


def eigen_paths(
    X: CurveSample, Y: CurveSample, J: int, lambdas: Sequence[float], do_center: bool = True
) -> EigenPaths:
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas[-1] != 1.0:
        raise ValueError("lambda grid must end at 1")
    X, Y = _prepare(X, Y, do_center)
    px = partial_eigen_path(X, lambdas, J)
    py = partial_eigen_path(Y, lambdas, J)
    return EigenPaths(px, py, ())


def dhat_process(X: CurveSample, Y: CurveSample, j: int, lam: float, do_center: bool = True) -> Curve:
    """The curve lam * (v^X_j(., lam) - v^Y_j(., lam)), zero when a partial sample is empty."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    lambdas = [lam, 1.0] if lam < 1.0 else [1.0]
    paths = eigen_paths(X, Y, j, lambdas, do_center)
    return Curve(X.grid, paths.dhat_curves(j)[0])


def dhat_distance(X: CurveSample, Y: CurveSample, j: int, do_center: bool = True) -> float:
    """Squared L2 distance between the aligned order-j sample eigenfunctions."""
    paths = eigen_paths(X, Y, j, [1.0], do_center)
    return float(paths.dhat_norms(j)[-1])


def _vhat_from_norms(norms: np.ndarray, lambdas: np.ndarray, nu: NuMeasure) -> float:
    bracket = norms - lambdas**2 * norms[-1]
    return float(np.sqrt(nu.integrate(bracket**2)))


def vhat(X: CurveSample, Y: CurveSample, j: int, nu: NuMeasure | None = None, do_center: bool = True) -> float:
    nu = nu if nu is not None else NuMeasure()
    paths = eigen_paths(X, Y, j, nu.lambda_grid, do_center)
    return _vhat_from_norms(paths.dhat_norms(j), paths.lambdas, nu)


def studentize(d_hat: float, delta: float, v_hat: float) -> tuple[float, list[str]]:
    """(d_hat - delta) / v_hat with the conventions for a vanishing normalizer."""
    if v_hat > 0:
        return (d_hat - delta) / v_hat, []
    note = ["degenerate normalizer: V_hat = 0"]
    if d_hat > delta:
        return np.inf, note
    if d_hat < delta:
        return -np.inf, note
    return np.nan, note


def decide(
    kind: str,
    d_hat: float,
    v_hat: float,
    delta: float,
    alpha: float,
    table: QuantileTable,
    warnings: Iterable[str] = (),
    config: dict | None = None,
) -> TestResult:
    w, notes = studentize(d_hat, delta, v_hat)
    crit = quantile(table, 1.0 - alpha)
    if np.isnan(w):
        p, reject = 1.0, False
    else:
        p, reject = p_value(table, w), bool(w > crit)
    return TestResult(
        kind=kind,
        d_hat=float(d_hat),
        v_hat=float(v_hat),
        w_hat=float(w),
        p_value=p,
        reject=reject,
        critical_value=crit,
        warnings=tuple(dict.fromkeys([*warnings, *notes])),
        config=dict(config or {}),
    )


def _check_table(table: QuantileTable, nu: NuMeasure):
    if table.nu != nu:
        raise ValueError("quantile table was simulated under a different nu")


def test_eigenfunction(
    X: CurveSample, Y: CurveSample, cfg: RelevanceTestConfig, table: QuantileTable
) -> TestResult:
    """Self-normalized test of ||v^X_j - v^Y_j||^2 <= delta."""
    return test_eigenfunctions(X, Y, [cfg.j], [cfg.delta], table, cfg)[0]


def test_eigenfunctions(
    X: CurveSample,
    Y: CurveSample,
    orders: Sequence[int],
    deltas: Sequence[float] | float,
    table: QuantileTable,
    cfg: RelevanceTestConfig | None = None,
    paths: EigenPaths | None = None,
) -> list[TestResult]:
    """Marginal eigenfunction tests for several orders sharing one set of eigenpaths.

    ``cfg`` supplies alpha, nu and centering; its ``j`` and ``delta`` are
    replaced by each entry of ``orders`` and ``deltas``.
    """
    cfg = cfg if cfg is not None else RelevanceTestConfig()
    _check_table(table, cfg.nu)
    orders = [int(j) for j in orders]
    if np.isscalar(deltas):
        deltas = [float(deltas)] * len(orders)
    if len(deltas) != len(orders):
        raise ValueError("need one delta per order")
    J = max(max(orders), cfg.n_pairs)
    if paths is None:
        paths = eigen_paths(X, Y, J, cfg.nu.lambda_grid, cfg.center)
    out = []
    for j, delta in zip(orders, deltas):
        sub = RelevanceTestConfig(j, float(delta), cfg.alpha, cfg.nu, J, cfg.center)
        norms = paths.dhat_norms(j)
        d_hat = float(norms[-1])
        v_hat = _vhat_from_norms(norms, paths.lambdas, cfg.nu)
        out.append(
            decide("eigenfunction", d_hat, v_hat, sub.delta, sub.alpha, table, paths.order_warnings(j), sub.echo())
        )
    return out


def test_eigenvalue(
    X: CurveSample, Y: CurveSample, cfg: RelevanceTestConfig, table: QuantileTable
) -> TestResult:
    """Self-normalized test of (tau^X_j - tau^Y_j)^2 <= delta.

    Uses T(lam) = lam * (tau^X_j(lam) - tau^Y_j(lam)), D = T(1)^2 and
    M = ( int (T(lam)^2 - lam^2 T(1)^2)^2 nu(d lam) )^(1/2); the statistic is
    (D - delta) / M. ``cfg.delta`` is in squared eigenvalue units.
    """
    _check_table(table, cfg.nu)
    paths = eigen_paths(X, Y, cfg.n_pairs, cfg.nu.lambda_grid, cfg.center)
    t = paths.eigenvalue_gap(cfg.j)
    lam = paths.lambdas
    d_val = float(t[-1] ** 2)
    bracket = t**2 - lam**2 * t[-1] ** 2
    m_hat = float(np.sqrt(cfg.nu.integrate(bracket**2)))
    warnings = [w for w in paths.order_warnings(cfg.j) if "ill-separated" in w or "empty" in w]
    return decide("eigenvalue", d_val, m_hat, cfg.delta, cfg.alpha, table, warnings, cfg.echo())
