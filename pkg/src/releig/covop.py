"""Covariance kernels, partial-sample kernels and their eigensystems."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .fda import Curve, CurveSample, Grid, _check_grid, _frozen

SEPARATION_RTOL = 1e-10
CENTERING_RTOL = 1e-8


def partial_count(m: int, lam: float) -> int:
    """floor(m * lam), tolerant to representation error in lam (0.29 * 100 -> 29)."""
    x = m * lam
    k = math.floor(x)
    if k + 1 - x <= 1e-9 * max(1.0, x):
        k += 1
    return k


@dataclass(frozen=True, eq=False)
class CovKernel:
    grid: Grid
    matrix: np.ndarray
    sample_fraction: float = 1.0
    effective_count: int = 0
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))

    def apply(self, f: Curve) -> Curve:
        """Quadrature-weighted kernel operator: (C f)(s) = sum_t C(s, t) f(t) w_t."""
        _check_grid(self.grid, f.grid)
        return Curve(self.grid, self.matrix @ (self.grid.weights * f.values))


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Leading eigenpairs, eigenvalues non-increasing; ``eigenfunctions[j - 1]`` is order j."""

    grid: Grid
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    ill_separated: tuple[int, ...] = ()
    degenerate: bool = False
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _frozen(self.eigenvalues))
        object.__setattr__(self, "eigenfunctions", _frozen(self.eigenfunctions))

    @property
    def count(self) -> int:
        return len(self.eigenvalues)

    def eigenfunction(self, j: int) -> Curve:
        return Curve(self.grid, self.eigenfunctions[j - 1])

    def eigenvalue(self, j: int) -> float:
        return float(self.eigenvalues[j - 1])


def _cov_matrix(values: np.ndarray) -> np.ndarray:
    k = values.shape[0]
    if k < 1:
        p = values.shape[1]
        return np.zeros((p, p))
    return values.T @ values / k


def _centering_warnings(sample: CurveSample) -> tuple[str, ...]:
    v = sample.values
    scale = max(float(np.sqrt(np.mean(v**2))), 1e-300)
    drift = float(np.abs(v.mean(axis=0)).max())
    if drift > CENTERING_RTOL * scale:
        return (f"sample '{sample.label}' is not centered (max |mean| = {drift:.3g})",)
    return ()


def estimate_cov(sample: CurveSample) -> CovKernel:
    """Sample covariance kernel (1/m) sum_i X_i(s) X_i(t) of a centered sample."""
    return estimate_cov_partial(sample, 1.0)


def estimate_cov_partial(sample: CurveSample, lam: float) -> CovKernel:
    """Covariance kernel averaged over the first floor(m * lam) curves; zero if that is < 1."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    k = partial_count(len(sample), lam)
    return CovKernel(
        sample.grid,
        _cov_matrix(sample.values[:k]),
        sample_fraction=float(lam),
        effective_count=k,
        warnings=_centering_warnings(sample),
    )


def _sign_convention(vecs: np.ndarray) -> np.ndarray:
    """Flip each row so that its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vecs), axis=-1)
    picked = np.take_along_axis(vecs, idx[..., None], axis=-1)
    return np.where(picked < 0, -vecs, vecs)


def _separation_flags(values: np.ndarray, J: int) -> tuple[int, ...]:
    top = values[0] if values.size else 0.0
    if top <= 0:
        return tuple(range(1, J + 1))
    gaps = -np.diff(values)
    bad = []
    for j in range(1, J + 1):
        lo = gaps[j - 2] if j >= 2 else np.inf
        hi = gaps[j - 1] if j - 1 < gaps.size else np.inf
        if min(lo, hi) < SEPARATION_RTOL * top:
            bad.append(j)
    return tuple(bad)


def eigen_decompose(kernel: CovKernel, J: int) -> EigenSystem:
    """Top-J eigenpairs of the quadrature-weighted kernel operator.

    Solves the symmetric problem for W^1/2 M W^1/2 and maps eigenvectors back
    through W^-1/2, so eigenfunctions have unit quadrature norm.
    """
    P = kernel.grid.size
    if not 1 <= J <= P:
        raise ValueError(f"J must be in [1, {P}], got {J}")
    M = kernel.matrix
    if not np.all(np.isfinite(M)):
        raise ValueError("kernel has non-finite entries")
    sw = np.sqrt(kernel.grid.weights)
    B = sw[:, None] * M * sw[None, :]
    B = 0.5 * (B + B.T)
    vals, vecs = np.linalg.eigh(B)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    funcs = _sign_convention((vecs[:, :J] / sw[:, None]).T)

    degenerate = not np.any(M)
    flags = _separation_flags(vals, J)
    warnings = list(kernel.warnings)
    if degenerate:
        warnings.append("zero kernel: eigenfunctions are arbitrary")
    elif flags:
        warnings.append(f"ill-separated eigenvalues at orders {list(flags)}")
    return EigenSystem(kernel.grid, vals[:J].copy(), funcs, flags, degenerate, tuple(warnings))


def align_signs(reference: EigenSystem, target: EigenSystem) -> EigenSystem:
    """Flip target eigenfunctions so that <reference_j, target_j> >= 0 (zero keeps the sign)."""
    _check_grid(reference.grid, target.grid)
    if reference.count != target.count:
        raise ValueError("eigensystems have different sizes")
    w = reference.grid.weights
    ip = (reference.eigenfunctions * target.eigenfunctions) @ w
    funcs = np.where((ip < 0)[:, None], -target.eigenfunctions, target.eigenfunctions)
    return EigenSystem(
        target.grid, target.eigenvalues, funcs, target.ill_separated, target.degenerate, target.warnings
    )


@dataclass(frozen=True, eq=False)
class PartialEigenPath:
    """Eigenpairs of the partial-sample kernels at a set of sample fractions.

    ``eigenvalues`` is (L, J) and ``eigenfunctions`` is (L, J, P); rows where
    ``counts < 1`` carry zero eigenvalues and zero functions.
    """

    grid: Grid
    lambdas: np.ndarray
    counts: np.ndarray
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    ill_separated: np.ndarray
    rank: int

    def system(self, i: int) -> EigenSystem:
        return EigenSystem(self.grid, self.eigenvalues[i], self.eigenfunctions[i])


def partial_eigen_path(sample: CurveSample, lambdas, J: int) -> PartialEigenPath:
    """Eigenpairs of every partial kernel along ``lambdas``.

    Every partial sample lies in the row space of the full weighted data matrix,
    so the eigenproblems are solved exactly in that (rank-r) coordinate system
    rather than on the P x P grid. Sign convention matches eigen_decompose.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    grid = sample.grid
    m, P = sample.values.shape
    if not 1 <= J <= P:
        raise ValueError(f"J must be in [1, {P}], got {J}")
    sw = np.sqrt(grid.weights)
    A = sample.values * sw
    U, S, Vt = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(S > S[0] * max(m, P) * np.finfo(float).eps)) if S.size and S[0] > 0 else 0
    coords = U[:, :r] * S[:r]
    basis = Vt[:r].T

    counts = np.array([partial_count(m, lam) for lam in lambdas], dtype=int)
    L = len(lambdas)
    grams = np.zeros((L, r, r))
    order = np.argsort(counts, kind="stable")
    acc = np.zeros((r, r))
    done = 0
    for i in order:
        k = counts[i]
        if k > done:
            blk = coords[done:k]
            acc = acc + blk.T @ blk
            done = k
        if k >= 1:
            grams[i] = acc / k

    n_eig = min(J + 1, r)
    vals_full = np.zeros((L, J + 1))
    vecs = np.zeros((L, J, P))
    if r > 0:
        ev, evec = np.linalg.eigh(0.5 * (grams + grams.transpose(0, 2, 1)))
        ev, evec = ev[:, ::-1], evec[:, :, ::-1]
        vals_full[:, :n_eig] = ev[:, :n_eig]
        take = min(J, r)
        vecs[:, :take] = np.einsum("pr,lrj->ljp", basis, evec[:, :, :take])
    if J > r:
        # eigenvalue-zero directions: a fixed orthonormal complement of the data span
        comp = null_space(basis.T) if r > 0 else np.eye(P)
        vecs[:, r:J] = comp[:, : J - r].T[None]
    funcs = _sign_convention(vecs / sw)
    undefined = counts < 1
    funcs[undefined] = 0.0
    vals_full[undefined] = 0.0

    flags = np.zeros((L, J), dtype=bool)
    for i in range(L):
        if undefined[i]:
            continue
        bad = _separation_flags(vals_full[i], J)
        for j in bad:
            flags[i, j - 1] = True
    return PartialEigenPath(grid, lambdas, counts, vals_full[:, :J], funcs, flags, r)
