"""Curves on a uniform grid of [0, 1], quadrature, centering and smoothing."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.interpolate import BSpline

MIN_GRID_POINTS = 16
DEFAULT_GRID_POINTS = 501


class GridMismatchError(ValueError):
    """Raised when two curves (or samples) live on different grids."""


class RankDeficientBasisError(ValueError):
    """Raised when a smoothing basis is not identified by the raw data."""

    def __init__(self, message: str, basis_index: int):
        super().__init__(message)
        self.basis_index = basis_index


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid on [0, 1] with trapezoid-rule weights summing to one."""

    size: int = DEFAULT_GRID_POINTS
    points: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.size) != self.size or self.size < MIN_GRID_POINTS:
            raise ValueError(f"grid needs at least {MIN_GRID_POINTS} points, got {self.size}")
        n = int(self.size)
        h = 1.0 / (n - 1)
        w = np.full(n, h)
        w[0] = w[-1] = h / 2
        object.__setattr__(self, "size", n)
        object.__setattr__(self, "points", _frozen(np.linspace(0.0, 1.0, n)))
        object.__setattr__(self, "weights", _frozen(w))

    def __eq__(self, other):
        return isinstance(other, Grid) and other.size == self.size

    def __hash__(self):
        return hash(("Grid", self.size))

    def curve(self, values) -> "Curve":
        return Curve(self, values)

    def evaluate(self, func) -> "Curve":
        """Curve holding ``func`` evaluated at the grid points."""
        return Curve(self, func(self.points))


@dataclass(frozen=True, eq=False)
class Curve:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != (self.grid.size,):
            raise ValueError(f"curve has {v.shape} values, grid has {self.grid.size} points")
        if not np.all(np.isfinite(v)):
            raise ValueError("curve values must be finite")
        object.__setattr__(self, "values", v)

    def __neg__(self):
        return Curve(self.grid, -self.values)

    def __add__(self, other: "Curve"):
        _check_grid(self.grid, other.grid)
        return Curve(self.grid, self.values + other.values)

    def __sub__(self, other: "Curve"):
        _check_grid(self.grid, other.grid)
        return Curve(self.grid, self.values - other.values)

    def __mul__(self, c: float):
        return Curve(self.grid, c * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class CurveSample:
    """Time-ordered curves on a shared grid, stored as an (m, P) array."""

    grid: Grid
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[1] != self.grid.size:
            raise ValueError(f"sample array must be (m, {self.grid.size}), got {v.shape}")
        if v.shape[0] < 2:
            raise ValueError("a sample needs at least two curves")
        if not np.all(np.isfinite(v)):
            raise ValueError("sample values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_curves(cls, curves: Sequence[Curve], label: str = "") -> "CurveSample":
        if not curves:
            raise ValueError("a sample needs at least two curves")
        grid = curves[0].grid
        for c in curves[1:]:
            _check_grid(grid, c.grid)
        return cls(grid, np.stack([c.values for c in curves]), label)

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, i: int) -> Curve:
        return Curve(self.grid, self.values[i])

    @property
    def curves(self) -> list[Curve]:
        return [self[i] for i in range(len(self))]

    def mean_curve(self) -> Curve:
        return Curve(self.grid, self.values.mean(axis=0))

    def scaled(self, c: float) -> "CurveSample":
        return CurveSample(self.grid, c * self.values, self.label)


def _check_grid(a: Grid, b: Grid):
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a.size} vs {b.size} points")


def inner_product(f: Curve, g: Curve) -> float:
    """Trapezoid approximation of the L2 inner product on [0, 1]."""
    _check_grid(f.grid, g.grid)
    return float(np.dot(f.grid.weights, f.values * g.values))


def norm_sq(f: Curve) -> float:
    return inner_product(f, f)


def center(sample: CurveSample) -> CurveSample:
    """Subtract the pointwise sample mean.

    Samples whose mean is already zero to rounding are returned as-is, which
    makes the operation exactly idempotent.
    """
    v = sample.values
    if _is_centered(v):
        return sample
    out = v
    for _ in range(4):
        out = out - out.mean(axis=0)
        if _is_centered(out):
            break
    return CurveSample(sample.grid, out, sample.label)


def _is_centered(v: np.ndarray) -> bool:
    scale = max(float(np.abs(v).max()), 1e-300)
    return bool(np.all(np.abs(v.mean(axis=0)) <= 64 * np.finfo(float).eps * scale))


def bspline_design(positions: np.ndarray, basis_size: int) -> np.ndarray:
    """Cubic B-spline design matrix with ``basis_size`` equally spaced interior knots.

    The basis has ``basis_size + 4`` functions on [0, 1].
    """
    if basis_size < 0:
        raise ValueError("basis_size must be nonnegative")
    interior = np.linspace(0.0, 1.0, basis_size + 2)[1:-1]
    knots = np.concatenate([np.zeros(4), interior, np.ones(4)])
    x = np.clip(np.asarray(positions, dtype=float), 0.0, 1.0)
    return BSpline.design_matrix(x, knots, 3, extrapolate=False).toarray()


def fourier_design(positions: np.ndarray, basis_size: int) -> np.ndarray:
    """Fourier basis 1, sqrt2 sin(2 pi k t), sqrt2 cos(2 pi k t), ... truncated at ``basis_size`` columns."""
    if basis_size < 1:
        raise ValueError("basis_size must be positive")
    x = np.asarray(positions, dtype=float)
    cols = [np.ones_like(x)]
    k = 1
    while len(cols) < basis_size:
        cols.append(np.sqrt(2) * np.sin(2 * np.pi * k * x))
        if len(cols) < basis_size:
            cols.append(np.sqrt(2) * np.cos(2 * np.pi * k * x))
        k += 1
    return np.column_stack(cols)


def _basis_count(basis_size: int, method: str) -> int:
    return basis_size + 4 if method == "bspline" else basis_size


def smooth_to_curve(
    positions,
    values,
    basis_size: int = 20,
    grid: Grid | None = None,
    method: Literal["bspline", "fourier"] = "bspline",
) -> Curve:
    """Least-squares projection of scattered (position, value) pairs onto a basis.

    Parameters
    ----------
    positions, values : array_like
        Raw observations; positions in [0, 1].
    basis_size : int
        Number of interior knots for ``method="bspline"`` (giving
        ``basis_size + 4`` cubic B-splines), or number of basis functions for
        ``method="fourier"``.
    grid : Grid, optional
        Evaluation grid, default ``Grid()``.
    """
    grid = grid if grid is not None else Grid()
    x = np.asarray(positions, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("positions and values must be 1-d arrays of equal length")
    if np.any((x < 0) | (x > 1)):
        raise ValueError("positions must lie in [0, 1]")
    nb = _basis_count(basis_size, method)
    if x.size < nb:
        raise ValueError(f"need at least {nb} raw points for {nb} basis functions, got {x.size}")

    if method == "bspline":
        design, design_grid = bspline_design(x, basis_size), bspline_design(grid.points, basis_size)
    elif method == "fourier":
        design, design_grid = fourier_design(x, basis_size), fourier_design(grid.points, basis_size)
    else:
        raise ValueError(f"unknown smoothing method {method!r}")

    _check_identified(design)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return Curve(grid, design_grid @ coef)


def _check_identified(design: np.ndarray):
    empty = np.flatnonzero(~np.any(design != 0, axis=0))
    if empty.size:
        k = int(empty[0])
        raise RankDeficientBasisError(f"basis function {k} has no raw points in its support", k)
    # pivoted QR points at the column that is numerically dependent on the others
    from scipy.linalg import qr

    _, r, piv = qr(design, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    tol = d[0] * max(design.shape) * np.finfo(float).eps * 10
    bad = np.flatnonzero(d <= tol)
    if bad.size:
        k = int(piv[bad[0]])
        raise RankDeficientBasisError(
            f"design is rank deficient (rank {bad[0]} < {design.shape[1]}); basis function {k} is not identified",
            k,
        )
